use rr_core::studies::{ConvergenceStudy, PrescribedMotion};
use rr_core::SelfForceModel;

#[test]
fn probe() {
    let study = ConvergenceStudy::new(PrescribedMotion::Circular { radius: 1.0, omega: 0.5 }, 1.0, 0.04, 4);
    for m in [SelfForceModel::RetardedHamiltonian, SelfForceModel::PresentTime] {
        let t = study.run(m).unwrap();
        println!("{:?}", t);
    }
}
