use brainstorm::simulator::{detect_transition, majority_accuracy_closed_form, run_sweep, PopulationSpec, SweepAxis};
use brainstorm::{NoiseMode, NoiseSpec};

const POINT: PopulationSpec = PopulationSpec::PointMass {
    precision: 0.7,
    recall: 0.7,
};

#[test]
fn accuracy_is_non_increasing_in_beta() {
    let noise = NoiseSpec::new(NoiseMode::SiteDependent, 1.0, 3);
    // Temperatures in decreasing order, so beta increases along the list.
    let temps = [f64::INFINITY, 20.0, 5.0, 2.0, 1.0, 0.5, 0.2];
    let grid = run_sweep(&POINT, &[5, 11], &noise, &temps, 20_000, 1).unwrap();
    for n in [5, 11] {
        let cells: Vec<_> = temps.iter().map(|&t| grid.cell(n, t).unwrap()).collect();
        for w in cells.windows(2) {
            let slack = 2.0 * (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt();
            assert!(
                w[1].accuracy <= w[0].accuracy + slack,
                "N={n}: beta {} -> {} raised accuracy {} -> {}",
                w[0].beta,
                w[1].beta,
                w[0].accuracy,
                w[1].accuracy
            );
        }
        // Strong noise pushes accuracy toward a coin flip.
        assert!(cells.last().unwrap().accuracy < cells[0].accuracy - 0.1);
    }
}

#[test]
fn condorcet_direction_without_noise() {
    let ns: Vec<usize> = (1..=25).step_by(2).collect();
    let grid = run_sweep(&POINT, &ns, &NoiseSpec::default(), &[f64::INFINITY], 20_000, 2).unwrap();
    let cells: Vec<_> = ns.iter().map(|&n| grid.cell(n, f64::INFINITY).unwrap()).collect();
    for w in cells.windows(2) {
        let slack = 2.0 * (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt();
        assert!(w[1].accuracy + slack >= w[0].accuracy, "{:?} -> {:?}", w[0], w[1]);
    }
    for c in &cells {
        let oracle = majority_accuracy_closed_form(c.n, 0.7).unwrap();
        assert!(
            (c.accuracy - oracle).abs() <= 4.0 * c.std_error.max(1e-3),
            "{c:?} vs {oracle}"
        );
    }
}

#[test]
fn perfect_agents_are_always_right_without_noise() {
    let pop = PopulationSpec::PointMass {
        precision: 1.0,
        recall: 1.0,
    };
    let grid = run_sweep(
        &pop,
        &[1, 4, 9],
        &NoiseSpec::new(NoiseMode::SiteDependent, f64::INFINITY, 0),
        &[],
        500,
        9,
    )
    .unwrap();
    assert!(grid.cells.iter().all(|c| c.accuracy == 1.0));
}

#[test]
fn cells_do_not_depend_on_the_rest_of_the_grid() {
    let noise = NoiseSpec::new(NoiseMode::SiteDependent, 1.0, 4);
    let pop = PopulationSpec::IndependentUniform { lo: 0.55, hi: 0.9 };
    let big = run_sweep(&pop, &[3, 7, 15], &noise, &[0.5, 1.0, 4.0], 300, 5).unwrap();
    let small = run_sweep(&pop, &[7], &noise, &[4.0, 1.0], 300, 5).unwrap();
    assert_eq!(big.cell(7, 1.0), small.cell(7, 1.0));
    assert_eq!(big.cell(7, 4.0), small.cell(7, 4.0));
}

#[test]
fn noise_transition_is_located_on_the_beta_axis() {
    let noise = NoiseSpec::new(NoiseMode::SiteDependent, 1.0, 6);
    let temps: Vec<f64> = [0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0].iter().map(|b| 1.0 / b).collect();
    let grid = run_sweep(&POINT, &[9], &noise, &temps, 5_000, 7).unwrap();
    let found = detect_transition(&grid, SweepAxis::Beta).unwrap();
    assert_eq!(found.len(), 1);
    let t = found[0].1;
    assert!(t.slope < 0.0, "{t:?}");
    let critical = t.critical.unwrap();
    assert!((0.02..=2.0).contains(&critical));
}
