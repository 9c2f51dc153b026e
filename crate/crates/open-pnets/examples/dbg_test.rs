// temporary debug binary
use open_pnets::{bisim, dsl, semantics};
fn main() {
    let spec = dsl::load_system(&std::fs::read_to_string("corpus/simple_prot_spec.pnet").unwrap(), &[]).unwrap();
    let imp = dsl::load_system(&std::fs::read_to_string("corpus/simple_prot_impl.pnet").unwrap(), &[]).unwrap();
    let oa_spec = semantics::derive(&spec, semantics::DeriveOptions::default()).unwrap();
    let oa_impl = semantics::derive(&imp, semantics::DeriveOptions::default()).unwrap();
    let rel = std::fs::read_to_string("corpus/spec_impl_weak_strengthened.rel").unwrap();
    let w = bisim::check_weak(&oa_spec, &oa_impl, &rel, bisim::CheckOptions { weak_depth: 2, ..Default::default() }).unwrap();
    eprintln!("strengthened WEAK: {:?}", w.verdict);
    for o in w.obligations.iter().filter(|o| !matches!(o.verdict, bisim::ObligationVerdict::Valid)) {
        eprintln!("  ({},{}) {:?}: {}\n      -> {:?}", o.left, o.right, o.direction, o.challenge, o.verdict);
    }
}
