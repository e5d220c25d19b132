//! Qualitative claims attached to each figure preset, on reduced grids.

use thermal_qsl::channel::InitialState;
use thermal_qsl::experiments::{run_sweep, Axis, Figure, ModelPoint, Parameter, SweepSpec, Table};
use thermal_qsl::qsl::qsl_time;

fn ratio(t: f64, omega: f64, state: InitialState, n: usize) -> f64 {
    let model = ModelPoint::reference(t, omega);
    let (_, traj) = model.evolve().unwrap();
    qsl_time(&traj, state, n, model.tau_d).unwrap().ratio
}

#[test]
fn fig1_drive_saturates_past_thirteen() {
    for t in [0.0, 0.5] {
        let (a, b) = (
            ratio(t, 14.0, InitialState::Excited, 1),
            ratio(t, 15.0, InitialState::Excited, 1),
        );
        assert!((a - b).abs() < 0.05, "T={t}: {a} vs {b}");
    }
    let plateau = ratio(0.2, 0.5, InitialState::Excited, 1);
    assert!((plateau - 1.0).abs() < 1e-6, "{plateau}");
}

#[test]
fn fig2_population_traces() {
    let mut spec = SweepSpec::preset(Figure::Fig2).unwrap();
    spec.series_stride = 1;
    let result = run_sweep(&spec, 0).unwrap();
    let Table::Population(rows) = result.table else {
        panic!("population table expected")
    };
    let trace = |t: f64, omega: f64| -> Vec<(f64, f64)> {
        rows.iter()
            .filter(|r| r.temperature == t && r.omega == omega)
            .map(|r| (r.population, r.population_rate))
            .collect()
    };
    for (t, omega) in [(0.0, 0.0), (0.8, 0.0), (0.0, 10.0), (0.8, 10.0)] {
        assert_eq!(trace(t, omega)[0].0, 1.0);
    }
    let undriven = trace(0.0, 0.0);
    assert!(undriven.windows(2).all(|w| w[1].0 <= w[0].0));

    for t in [0.0, 0.8] {
        let strong = ratio(t, 10.0, InitialState::Excited, 1);
        assert!(strong < 1.0);
        assert!(trace(t, 10.0).iter().any(|&(_, rate)| rate > 0.0), "T={t}");
    }
}

#[test]
fn fig3_entanglement_and_drive() {
    let weak_cold = ratio(0.0, 0.1, InitialState::Ghz, 2);
    assert!(weak_cold < 1.0, "{weak_cold}");
    for t in [0.0, 0.4, 0.8] {
        let weak = ratio(t, 0.1, InitialState::Ghz, 2);
        let strong = ratio(t, 0.3, InitialState::Ghz, 2);
        assert!(strong < weak, "T={t}: {strong} vs {weak}");
    }
}

#[test]
fn fig4_entanglement_first_lowers_the_ratio() {
    let mut spec = SweepSpec::preset(Figure::Fig4).unwrap();
    spec.axes = vec![Axis::new(Parameter::Qubits, 1.0, 3.0, 3)];
    let Table::Ratio(rows) = run_sweep(&spec, 0).unwrap().table else {
        panic!("ratio table expected")
    };
    assert!(rows[1].ratio < rows[0].ratio);
    assert!(rows[2].ratio < rows[1].ratio);
}

#[test]
fn fig5_thermal_series_in_strong_drive() {
    let mut spec = SweepSpec::preset(Figure::Fig5).unwrap();
    spec.axes[1] = Axis::new(Parameter::Omega, 0.0, 6.0, 7);
    let Table::Ratio(rows) = run_sweep(&spec, 0).unwrap().table else {
        panic!("ratio table expected")
    };
    let at = |t: f64, omega: f64| {
        rows.iter()
            .find(|r| r.temperature == t && r.omega == omega)
            .unwrap()
            .ratio
    };
    for omega in [0.0, 1.0] {
        assert!((at(0.1, omega) - 1.0).abs() < 1e-6);
        assert!((at(0.5, omega) - 1.0).abs() < 1e-6);
    }
    for omega in [3.0, 6.0] {
        assert!(at(0.5, omega) <= at(0.1, omega), "Omega={omega}");
    }
}
