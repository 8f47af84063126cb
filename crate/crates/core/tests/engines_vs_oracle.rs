use mpsim_core::itebd::{ItebdEvolver, ItebdState};
use mpsim_core::models::{
    build_xxz_gate, super_generator, BondWeights, ChainLength, ModelParams, OperatorBasis, SIGMA_PLUS, SIGMA_Z,
};
use mpsim_core::mpdo::{MpdoEvolver, MpdoState};
use mpsim_core::mps::MpsState;
use mpsim_core::oracle::{self, DenseDensity, DenseKet};
use mpsim_core::trajectory::{run_trajectory, Scheme, TrajectoryConfig};
use mpsim_core::trotter::{fused_layers, TrotterOrder};
use mpsim_core::{Truncation, C64};

fn model(n: usize, delta: f64, gp: f64, gm: f64, gz: f64) -> ModelParams {
    ModelParams::new(1.0, delta, gp, gm, gz, ChainLength::Finite(n)).unwrap()
}

#[test]
fn two_site_generator_matches_dense_lindbladian() {
    let p = model(2, 0.7, 0.3, 0.5, 0.4);
    let basis = OperatorBasis::linearized();
    let gen = super_generator(&p, &basis, BondWeights { left: 1.0, right: 1.0 });
    for k1 in 0..4 {
        for k2 in 0..4 {
            // ê = |a⟩⟨b| with index 2a + b
            let (a1, b1, a2, b2) = (k1 / 2, k1 % 2, k2 / 2, k2 % 2);
            let mut rho = vec![C64::new(0.0, 0.0); 16];
            rho[(2 * a1 + a2) * 4 + 2 * b1 + b2] = C64::new(1.0, 0.0);
            let out = oracle::lindblad_rhs(&p, 2, &rho);
            for i1 in 0..4 {
                for i2 in 0..4 {
                    let (c1, d1, c2, d2) = (i1 / 2, i1 % 2, i2 / 2, i2 % 2);
                    let want = out[(2 * c1 + c2) * 4 + 2 * d1 + d2];
                    let got = gen[(4 * i1 + i2) * 16 + 4 * k1 + k2];
                    assert!((want - got).norm() < 1e-13, "{k1}{k2} -> {i1}{i2}: {want} vs {got}");
                }
            }
        }
    }
}

fn mpdo_vs_dense(p: ModelParams, dt: f64, t_max: f64, chi: usize) -> (f64, f64, f64) {
    let n = p.n_sites().unwrap();
    let steps = (t_max / dt).round() as usize;
    let trunc = Truncation::chi(chi);
    let mut ev = MpdoEvolver::<f64>::new(p, OperatorBasis::pauli(), dt, trunc, TrotterOrder::Fourth).unwrap();
    let mut st = MpdoState::<f64>::neel(n, OperatorBasis::pauli()).unwrap();
    let mut mps_series = vec![(st.magnetization(), 0.0)];
    for _ in 0..steps {
        ev.advance(&mut st, 1).unwrap();
        st.canonicalize(trunc).unwrap();
        mps_series.push((st.magnetization(), st.operator_entanglement(n / 2 - 1)));
    }
    let dense = oracle::dense_lindblad_evolve(&DenseDensity::neel(n).unwrap(), &p, dt, t_max).unwrap();
    assert_eq!(dense.len(), mps_series.len());
    let (mut dz, mut doe, mut dtr) = (0.0f64, 0.0f64, 0.0f64);
    for ((_, rho), (mz, oe)) in dense.iter().zip(&mps_series).skip(1) {
        for (a, b) in rho.magnetization().iter().zip(mz) {
            dz = dz.max((a - b).abs());
        }
        doe = doe.max((oracle::dense_oe(rho, n / 2).unwrap() - oe).abs());
        dtr = dtr.max((rho.trace().re - 1.0).abs());
    }
    (dz, doe, dtr)
}

#[test]
fn mpdo_matches_dense_balanced_rates() {
    let (dz, doe, _) = mpdo_vs_dense(model(4, 1.0, 0.5, 0.5, 0.0), 0.05, 2.0, 64);
    assert!(dz < 1e-6, "magnetization deviation {dz}");
    assert!(doe < 1e-5, "OE deviation {doe}");
}

#[test]
fn mpdo_matches_dense_mixed_channels() {
    let (dz, doe, _) = mpdo_vs_dense(model(4, 0.6, 0.2, 1.0, 0.7), 0.05, 1.5, 64);
    assert!(dz < 1e-6, "magnetization deviation {dz}");
    assert!(doe < 1e-5, "OE deviation {doe}");
}

#[test]
fn bases_agree() {
    let p = model(6, 1.0, 0.3, 0.6, 0.2);
    let trunc = Truncation::chi(64);
    let mut a = MpdoState::<f64>::neel(6, OperatorBasis::pauli()).unwrap();
    let mut b = MpdoState::<C64>::neel(6, OperatorBasis::linearized()).unwrap();
    let mut ea = MpdoEvolver::<f64>::new(p, OperatorBasis::pauli(), 0.1, trunc, TrotterOrder::Fourth).unwrap();
    let mut eb = MpdoEvolver::<C64>::new(p, OperatorBasis::linearized(), 0.1, trunc, TrotterOrder::Fourth).unwrap();
    ea.advance(&mut a, 10).unwrap();
    eb.advance(&mut b, 10).unwrap();
    for (x, y) in a.magnetization().iter().zip(b.magnetization()) {
        assert!((x - y).abs() < 1e-10);
    }
    let (da, db) = (a.to_dense_matrix(), b.to_dense_matrix());
    let dist: f64 = da.iter().zip(&db).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    assert!(dist < 1e-10);
}

#[test]
fn steady_state_is_maximally_mixed() {
    let p = model(2, 1.0, 1.0, 1.0, 0.0);
    let out = oracle::dense_lindblad_evolve(&DenseDensity::neel(2).unwrap(), &p, 1.0, 12.0).unwrap();
    let last = &out.last().unwrap().1;
    assert!(oracle::distance_to_identity(last) < 1e-8);
    assert!(oracle::dense_oe(last, 1).unwrap() < 1e-6);
}

#[test]
fn closed_tebd_matches_exact_evolution() {
    let n = 8;
    let p = model(n, 0.5, 0.0, 0.0, 0.0);
    let (dt, steps) = (0.05, 40);
    let mut s = MpsState::neel(n).unwrap();
    for layer in fused_layers(TrotterOrder::Fourth, steps) {
        let g = build_xxz_gate(&p, layer.fraction * dt).unwrap();
        s.apply_layer(&g, layer.parity, Truncation::chi(64)).unwrap();
    }
    let exact = oracle::exact_unitary_evolve(&DenseKet::neel(n).unwrap(), &p, dt * steps as f64).unwrap();
    let v = s.to_dense();
    let overlap: C64 = exact.psi.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
    assert!((overlap.norm() - 1.0).abs() < 1e-8);
    for cut in 1..n {
        let want = oracle::dense_pure_entropy(&exact, cut).unwrap();
        assert!((s.bond_entropy(cut - 1) - want).abs() < 1e-7);
    }
}

#[test]
fn per_step_trajectories_match_dense_jump_logs() {
    let n = 4;
    for p in [model(n, 1.0, 0.4, 1.1, 0.0), model(n, 1.0, 0.0, 0.0, 0.9), model(n, 1.0, 0.5, 0.5, 0.5)] {
        let dt = 0.02;
        let mut cfg = TrajectoryConfig::new(p, 16, dt, 0.1, 3.0, 77, Scheme::PerStepConditional);
        cfg.cutoff = 1e-14;
        for index in 0..4u64 {
            let tr = run_trajectory(&cfg, index).unwrap();
            let mut rng = mpsim_core::trajectory::trajectory_rng(cfg.seed, index);
            let mut psi = DenseKet::neel(n).unwrap();
            let mut log = Vec::new();
            let steps = (3.0f64 / dt).round() as usize;
            for k in 1..=steps {
                for mut j in oracle::dense_trajectory_step(&mut psi, &p, dt, &mut rng).unwrap() {
                    j.time = k as f64 * dt;
                    log.push(j);
                }
            }
            assert_eq!(tr.jumps.len(), log.len());
            for (a, b) in tr.jumps.iter().zip(&log) {
                assert_eq!((a.site, a.channel), (b.site, b.channel));
                assert!((a.time - b.time).abs() < 1e-9);
            }
            let mz = tr.magnetization.last().unwrap();
            for (site, m) in mz.iter().enumerate() {
                assert!((psi.expectation(&SIGMA_Z, site) - m).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn rare_jump_creates_block_entanglement() {
    // |↓↑↓↑⟩ after a short flip-flop, then σ⁺ on the second spin
    let p = model(4, 1.0, 0.0, 0.0, 0.0);
    let start = DenseKet::product(&[false, true, false, true]).unwrap();
    let mut psi = oracle::exact_unitary_evolve(&start, &p, 0.01).unwrap();
    psi.apply_site(1, &SIGMA_PLUS);
    psi.normalize().unwrap();
    let s = oracle::dense_pure_entropy(&psi, 2).unwrap();
    assert!((s - 1.0).abs() < 1e-3, "{s}");
}

#[test]
fn itebd_matches_finite_bulk() {
    let p_inf = ModelParams::new(1.0, 1.0, 0.0, 0.0, 1.0, ChainLength::Infinite).unwrap();
    let p_fin = p_inf.with_length(ChainLength::Finite(16)).unwrap();
    let (dt, steps) = (0.1, 15);
    let trunc = Truncation::chi(48);
    let mut inf = ItebdState::<f64>::neel(OperatorBasis::pauli()).unwrap();
    let mut ei = ItebdEvolver::new(p_inf, OperatorBasis::pauli(), dt, trunc, TrotterOrder::Fourth).unwrap();
    let mut fin = MpdoState::<f64>::neel(16, OperatorBasis::pauli()).unwrap();
    let mut ef = MpdoEvolver::<f64>::new(p_fin, OperatorBasis::pauli(), dt, trunc, TrotterOrder::Fourth).unwrap();
    for _ in 0..steps / 5 {
        ei.advance(&mut inf, 5).unwrap();
        ef.advance(&mut fin, 5).unwrap();
        let mi = inf.magnetization().unwrap();
        let mf = fin.magnetization();
        assert!((mi[0] - mf[8]).abs() < 1e-3, "{} vs {}", mi[0], mf[8]);
        assert!((mi[1] - mf[7]).abs() < 1e-3, "{} vs {}", mi[1], mf[7]);
    }
}
