use softcc::sim::{preset, run_scenario, ControllerConfig};
use std::time::Instant;

#[test]
fn probe_curvature_trend_and_runtime() {
    for gain in [0.0, 0.08, 0.3] {
        let mut config = preset("curvature-tracking").unwrap();
        if let ControllerConfig::Curvature { integral_gain_nm_per_s, .. } = &mut config.controller {
            *integral_gain_nm_per_s = gain;
        }
        let t0 = Instant::now();
        let result = run_scenario(&config).unwrap();
        println!(
            "I_q={gain}: L2 = {:?} rad, wall time {:.2} s",
            result.metrics.l2_curvature_error_rad,
            t0.elapsed().as_secs_f64()
        );
    }
}

#[test]
fn probe_rk4_order() {
    use nalgebra::DVector;
    let base = preset("free-oscillation").unwrap();
    let model = softcc::SoftRobotModel::new(base.robot.to_description().unwrap()).unwrap();
    let mut finals: Vec<(DVector<f64>, DVector<f64>)> = vec![];
    for div in [1, 2, 4] {
        let mut config = base.clone();
        config.dt_s = base.dt_s / div as f64;
        let result = run_scenario(&config).unwrap();
        let last = result.series.samples.last().unwrap();
        finals.push((last.q.clone(), last.qdot.clone()));
    }
    // Error in the mechanical energy norm at the reference configuration.
    let b = model.mass_matrix(&finals[2].0).unwrap();
    let k = model.stiffness_matrix();
    let err = |a: &(DVector<f64>, DVector<f64>), c: &(DVector<f64>, DVector<f64>)| -> f64 {
        let dq = &a.0 - &c.0;
        let dv = &a.1 - &c.1;
        (0.5 * dv.dot(&(&b * &dv)) + 0.5 * dq.dot(&(&k * &dq))).sqrt()
    };
    let e1 = err(&finals[0], &finals[1]);
    let e2 = err(&finals[1], &finals[2]);
    println!("e(dt)={e1:.3e} e(dt/2)={e2:.3e} order={:.2}", (e1 / e2).log2());
}

#[test]
fn probe_energy_drift() {
    let mut config = preset("free-oscillation").unwrap();
    config.dt_s = 1.0e-4;
    config.control_period_s = 0.02;
    let result = run_scenario(&config).unwrap();
    let model = softcc::SoftRobotModel::new(config.robot.to_description().unwrap()).unwrap();
    let s0 = &result.series.samples[0];
    let sn = result.series.samples.last().unwrap();
    let h0 = model.total_energy(&s0.q, &s0.qdot).unwrap();
    let hn = model.total_energy(&sn.q, &sn.qdot).unwrap();
    println!("H0={h0:.6e} Hn={hn:.6e} rel drift={:.3e}", ((hn - h0) / h0).abs());
}

#[test]
fn probe_surface_follow() {
    let mut config = preset("surface-follow").unwrap();
    config.dt_s = 1.0e-4;
    config.total_time_s = 9.0;
    let t0 = Instant::now();
    let result = run_scenario(&config).unwrap();
    let m = &result.metrics;
    println!(
        "contact_onset={:?} done={:?} switches={} max_pen={:.2e} contact_dur={:.2} final_tip=({:.4},{:.4}) wall={:.1}s",
        m.contact_onset_s, m.explore_done_s, m.phase_switches, m.max_penetration_m,
        m.contact_duration_s, m.final_tip_m[0], m.final_tip_m[1], t0.elapsed().as_secs_f64()
    );
    // contact in final 1 s?
    let t_end = config.total_time_s;
    let persistent = result.series.samples.iter().filter(|s| s.t >= t_end - 1.0).all(|s| s.contact);
    println!("contact persists final 1 s: {persistent}");
    let last = result.series.samples.last().unwrap();
    println!("tangential err vs xt: {:.4}", (last.tip.y - 0.160f64).abs());
}

#[test]
fn probe_hierarchy() {
    let config = preset("hierarchy-demo").unwrap();
    let t0 = Instant::now();
    let result = run_scenario(&config).unwrap();
    println!("max_task_errors={:?} wall={:.1}s", result.metrics.max_task_errors, t0.elapsed().as_secs_f64());
    // tip error after transient (t>4s)
    let mut max_tip_err: f64 = 0.0;
    for s in &result.series.samples {
        if s.t > 4.0 && s.task_errors.len() > 1 {
            max_tip_err = max_tip_err.max(s.task_errors[1]);
        }
    }
    println!("max tip position error after 4 s: {max_tip_err:.4} m");
}
