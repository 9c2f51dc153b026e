//! Book chapters, included as doc-tested modules.
