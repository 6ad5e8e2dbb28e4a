use nalgebra::DVector;
use softcc::{RobotDescription, SoftRobotModel};
use std::time::Instant;

#[test]
fn probe_hot_path_costs() {
    let model = SoftRobotModel::new(RobotDescription::floating_five_segment(2.0, 0.02)).unwrap();
    let q = DVector::from_fn(8, |i, _| 0.1 * i as f64);
    let qdot = DVector::from_fn(8, |i, _| 0.05 * i as f64);
    let tau = DVector::zeros(8);

    let t0 = Instant::now();
    for _ in 0..2000 {
        let _ = model
            .conservative_dynamics_with(&q, &qdot, &tau, |_, _| nalgebra::Vector2::zeros())
            .unwrap();
    }
    println!("conservative_dynamics: {:.1} us/call", t0.elapsed().as_secs_f64() / 2000.0 * 1e6);

    let t0 = Instant::now();
    for _ in 0..2000 {
        let _ = model.damping_decay(&q, &qdot, 5e-5).unwrap();
    }
    println!("damping_decay:         {:.1} us/call", t0.elapsed().as_secs_f64() / 2000.0 * 1e6);

    let t0 = Instant::now();
    for _ in 0..200 {
        let _ = model.project_dynamics(&q, &qdot).unwrap();
    }
    println!("project_dynamics:      {:.1} us/call", t0.elapsed().as_secs_f64() / 200.0 * 1e6);

    let t0 = Instant::now();
    for _ in 0..2000 {
        let _ = model.tip_state(&q, &qdot).unwrap();
    }
    println!("tip_state:             {:.1} us/call", t0.elapsed().as_secs_f64() / 2000.0 * 1e6);
}
