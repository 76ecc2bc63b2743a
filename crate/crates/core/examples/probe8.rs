use fbme_core::fock;
use fbme_core::models::{
    build_ao_adiabatic, build_ao_compound, build_eo_mode_adiabatic,
    build_eo_mode_compound_transformed, AncillaKind, AncillaParams, AoForm, SystemParams,
};
use fbme_core::{
    bures_distance, ensemble_average, reduced_steady, simulate_trajectory, steady_state,
    UnravelSpec,
};
use std::f64::consts::FRAC_PI_2;
use std::time::Instant;

fn main() {
    // 1. eo-mode adiabatic steady at lambda 2.2: tail populations
    for n_max in [35usize, 41] {
        let sys = SystemParams::new(2.2, FRAC_PI_2, n_max).unwrap();
        let anc = AncillaParams::eo_mode_linked(10.0, FRAC_PI_2, 0.001, 4).unwrap();
        let t0 = Instant::now();
        let rep = steady_state(&build_eo_mode_adiabatic(&sys, &anc).unwrap()).unwrap();
        let pops = rep.state.populations();
        let mean_n: f64 = pops.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        println!(
            "adiabatic n_max={n_max}: solve {:?}, <n>={mean_n:.3}, p(28)={:.2e}, p(32)={:.2e}, p(top)={:.2e}",
            t0.elapsed(),
            pops[28],
            pops[32],
            pops[n_max]
        );
    }

    // 2. AO adiabatic at lambda 0.97: truncation tails
    for n_max in [20usize, 26] {
        let sys = SystemParams::new(0.97, FRAC_PI_2, n_max).unwrap();
        let rep = steady_state(&build_ao_adiabatic(&sys, AoForm::Rational).unwrap()).unwrap();
        let pops = rep.state.populations();
        let mean_n: f64 = pops.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        println!(
            "ao adiabatic n_max={n_max}: <n>={mean_n:.3}, p(18)={:.2e}, p(top)={:.2e}",
            pops[18], pops[n_max]
        );
    }

    // 3. AO mode compound at Gamma=1 (worst case): solve time + health
    let sys = SystemParams::new(0.97, FRAC_PI_2, 20).unwrap();
    let anc = AncillaParams::ao_linked(1.0, FRAC_PI_2, 10);
    let t0 = Instant::now();
    let l = build_ao_compound(&sys, &anc, AncillaKind::Mode).unwrap();
    let rep = steady_state(&l).unwrap();
    println!(
        "ao mode compound Gamma=1: solve {:?}, health {:?}",
        t0.elapsed(),
        rep.truncation_health
    );
    let reduced = reduced_steady(&l, 0).unwrap();
    let target = steady_state(&build_ao_adiabatic(&sys, AoForm::Rational).unwrap()).unwrap();
    println!("  bures(reduced, adiabatic) = {:.4}", bures_distance(&reduced, &target.state).unwrap().bures);

    // 4. trajectory pilot for the transformed model
    for (gamma, dim_b, n_max) in [(10.0, 8usize, 35usize), (10.0, 10, 35), (100.0, 5, 35), (100.0, 6, 35)] {
        let sys = SystemParams::new(2.2, FRAC_PI_2, n_max).unwrap();
        let anc = AncillaParams::eo_mode_linked(gamma, FRAC_PI_2, 0.001, dim_b).unwrap();
        let model = build_eo_mode_compound_transformed(&sys, &anc).unwrap();
        let spec = UnravelSpec::from_time_dependent(&model).unwrap();
        let psi0 = fock::basis_state(spec.space(), &[0, 0]).unwrap();
        let times = [10.0, 20.0];
        let t0 = Instant::now();
        let mut discards = 0usize;
        let mut f_sum = 0.0;
        let mut jumps = 0usize;
        for k in 0..10u64 {
            let rec = simulate_trajectory(&spec, &psi0, &times, 1000 + k).unwrap();
            if let Some(reason) = &rec.discarded {
                discards += 1;
                println!("  discard: {reason}");
            } else {
                f_sum += rec.f_samples.iter().sum::<f64>() / rec.f_samples.len() as f64;
                jumps += rec.jumps.len();
            }
        }
        println!(
            "traj Gamma={gamma} dim_b={dim_b} n_max={n_max}: 10 traj in {:?}, discards {discards}, mean f {:.3}, jumps/traj {:.1}",
            t0.elapsed(),
            f_sum / (10 - discards).max(1) as f64,
            jumps as f64 / (10 - discards).max(1) as f64
        );
    }

    // 5. small ensembles through the full pipeline: timing plus a physics
    // check that the conditioned photon number sits near the adiabatic value
    for (gamma, dim_b) in [(10.0, 8usize), (100.0, 5)] {
        let sys = SystemParams::new(2.2, FRAC_PI_2, 35).unwrap();
        let anc = AncillaParams::eo_mode_linked(gamma, FRAC_PI_2, 0.001, dim_b).unwrap();
        let model = build_eo_mode_compound_transformed(&sys, &anc).unwrap();
        let spec = UnravelSpec::from_time_dependent(&model).unwrap();
        let psi0 = fock::basis_state(spec.space(), &[0, 0]).unwrap();
        let number = fock::number(spec.space(), 0).unwrap();
        let t0 = Instant::now();
        let est = ensemble_average(&spec, &psi0, &[10.0, 20.0], 50, 77, 1, &[number]).unwrap();
        println!(
            "ensemble Gamma={gamma}: 50 traj in {:?}, discarded {}, <n>(10)={:.3}+-{:.3}, <n>(20)={:.3}+-{:.3}",
            t0.elapsed(),
            est.n_discarded,
            est.observable_means[(0, 0)],
            est.observable_ses[(0, 0)],
            est.observable_means[(1, 0)],
            est.observable_ses[(1, 0)],
        );
    }
}
