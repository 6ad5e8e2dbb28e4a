use softcc::sim::{preset, run_scenario};

#[test]
fn probe_surface_trajectory() {
    let mut config = preset("surface-follow").unwrap();
    config.total_time_s = 6.0;
    let result = run_scenario(&config).unwrap();
    for s in result.series.samples.iter().step_by(33) {
        println!(
            "t={:5.2} tip=({:+.3},{:+.3}) q=[{}] |tau|={:.2}",
            s.t, s.tip.x, s.tip.y,
            s.q.iter().map(|v| format!("{v:+.2}")).collect::<Vec<_>>().join(","),
            s.tau.amax()
        );
    }
}
