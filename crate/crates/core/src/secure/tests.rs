use approx::assert_relative_eq;
use num_complex::Complex64;

use super::*;
use crate::array::ArrayGeometry;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn ones(n: usize) -> ComplexVector {
    ComplexVector::from_element(n, c(1.0, 0.0))
}

fn db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

/// Two Rician users at well-separated angles, target at broadside.
fn base_scenario(n: usize, gamma_db: f64, power: f64) -> Scenario {
    Scenario {
        geometry: ArrayGeometry::half_wavelength(n).unwrap(),
        users: vec![
            UserChannelSpec::Rician {
                kappa: 20.0,
                angle: (-40f64).to_radians(),
                seed: 11,
            },
            UserChannelSpec::Rician {
                kappa: 20.0,
                angle: 40f64.to_radians(),
                seed: 12,
            },
        ],
        target_angle: 0.0,
        target_gain: c(1.0, 0.0),
        clutter: vec![],
        noise_user: 1.0,
        noise_eve: 1.0,
        noise_radar: 1.0,
        power_budget: power,
        user_sinr_threshold: db(gamma_db),
        beampattern: BeampatternSpec {
            floor_fraction: 0.5,
            sidelobe_cap_fraction: None,
            grid_step: 2.0_f64.to_radians(),
        },
        uncertainty: None,
        designated_stream: 0,
        protect_all_streams: true,
        modulation_order: 4,
    }
}

fn channels_for(scenario: &Scenario) -> ChannelSet {
    scenario.channel_set().unwrap()
}

// --- metric evaluators -----------------------------------------------------

#[test]
fn user_sinr_single_user_matched() {
    let mut sc = base_scenario(4, 10.0, 100.0);
    sc.users = vec![UserChannelSpec::Explicit(ones(4))];
    let ch = channels_for(&sc);
    let w = vec![ones(4)];
    assert_relative_eq!(user_sinr(&w, 0, &ch), 16.0, epsilon = 1e-12);
}

#[test]
fn user_sinr_orthogonal_beam_is_zero() {
    let mut sc = base_scenario(2, 10.0, 100.0);
    sc.users = vec![UserChannelSpec::Explicit(ComplexVector::from_vec(vec![
        c(1.0, 0.0),
        c(1.0, 0.0),
    ]))];
    let ch = channels_for(&sc);
    let w = vec![ComplexVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)])];
    assert!(user_sinr(&w, 0, &ch) < 1e-30);
}

/// Dual-path check: vector form against the covariance form on a random
/// instance.
#[test]
fn user_sinr_vector_equals_covariance_of_outer_product() {
    let sc = base_scenario(6, 10.0, 100.0);
    let ch = channels_for(&sc);
    let mut rng = crate::rng::stream_rng(44, &[1]);
    use rand::Rng;
    let w: Vec<ComplexVector> = (0..2)
        .map(|_| {
            ComplexVector::from_fn(6, |_, _| {
                c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            })
        })
        .collect();
    let covs: Vec<HermitianMatrix> = w
        .iter()
        .map(|wk| {
            let mut r = HermitianMatrix::zeros(6, 6);
            for i in 0..6 {
                for j in 0..6 {
                    r[(i, j)] = wk[i] * wk[j].conj();
                }
            }
            r
        })
        .collect();
    for k in 0..2 {
        assert_relative_eq!(
            user_sinr(&w, k, &ch),
            user_sinr_cov(&covs, k, &ch),
            max_relative = 1e-12
        );
    }
}

#[test]
fn eve_sinr_orthogonal_is_zero_and_cov_matches() {
    let n = 4;
    let eve = ComplexVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
    let w = vec![ComplexVector::from_vec(vec![
        c(1.0, 0.0),
        c(-1.0, 0.0),
        c(1.0, 0.0),
        c(-1.0, 0.0),
    ])];
    assert!(eve_sinr(&w, 0, &eve, 1.0) < 1e-30);
    let mut r = HermitianMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            r[(i, j)] = w[0][i] * w[0][j].conj();
        }
    }
    assert_relative_eq!(
        eve_sinr(&w, 0, &eve, 1.0),
        eve_sinr_cov(&[r], 0, &eve, 1.0),
        epsilon = 1e-14
    );
}

/// Isotropic covariance: per-stream eavesdropping SINR has the closed form
/// (P/K) |alpha|^2 / ((K-1)(P/K) |alpha|^2 + sigma_E^2).
#[test]
fn eve_sinr_isotropic_closed_form() {
    let n = 4;
    let k_users = 3;
    let p = 12.0;
    let alpha = c(0.8, 0.3);
    let geo = ArrayGeometry::half_wavelength(n).unwrap();
    let eve = crate::array::los_channel(&geo, 0.35, alpha).unwrap();
    let covs: Vec<HermitianMatrix> = (0..k_users)
        .map(|_| HermitianMatrix::identity(n, n).map(|e| e * c(p / (k_users * n) as f64, 0.0)))
        .collect();
    let sigma_e2 = 0.7;
    let got = eve_sinr_cov(&covs, 0, &eve, sigma_e2);
    let share = p / k_users as f64; // per-stream power
    let rx = share * alpha.norm_sqr(); // a^H (p/N I) a = p for unit-modulus a
    let want = rx / ((k_users - 1) as f64 * rx + sigma_e2);
    assert_relative_eq!(got, want, max_relative = 1e-12);
}

#[test]
fn secrecy_rate_cases() {
    assert_eq!(secrecy_rate(5.0, 5.0), 0.0);
    assert_relative_eq!(secrecy_rate(3.0, 0.0), 2.0, epsilon = 1e-15);
    // 40 dB user SINR against a 0 dB eavesdropper.
    let want = (10001f64).log2() - 1.0;
    assert_relative_eq!(secrecy_rate(1e4, 1.0), want, epsilon = 1e-12);
    // Eavesdropper ahead: clamped to zero.
    assert_eq!(secrecy_rate(1.0, 3.0), 0.0);
}

#[test]
fn scnr_cases() {
    let n = 4;
    let geo = ArrayGeometry::half_wavelength(n).unwrap();
    let mut sc = base_scenario(n, 10.0, 100.0);
    sc.users = vec![UserChannelSpec::Explicit(ones(n))];
    sc.target_angle = 0.3;
    sc.target_gain = c(0.0, 1.2);
    let ch = channels_for(&sc);

    // Coherent focus: R = (P/N^2) a a^H gives a^H R a = P.
    let p = 9.0;
    let a = crate::array::steering_vector(&geo, 0.3).unwrap();
    let mut r = HermitianMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            r[(i, j)] = a[i] * a[j].conj() * c(p / (n * n) as f64, 0.0);
        }
    }
    let got = scnr(&geo, &r, &ch).unwrap();
    assert_relative_eq!(got, 1.2 * 1.2 * p / 1.0, max_relative = 1e-12);

    // Zero covariance: zero ratio.
    let z = HermitianMatrix::zeros(n, n);
    assert_eq!(scnr(&geo, &z, &ch).unwrap(), 0.0);

    // Blowing up a clutter gain drives the ratio to zero.
    let mut ch2 = ch.clone();
    ch2.clutter = vec![crate::array::ClutterSource {
        angle: -0.5,
        gain: c(1e6, 0.0),
    }];
    let with_clutter = scnr(&geo, &r, &ch2).unwrap();
    assert!(with_clutter < 1e-6 * got);
}

// --- feasibility-program reductions ---------------------------------------

/// With only the SINR family active and K=1, feasibility is exactly
/// gamma <= P ||h||^2 / sigma^2 (matched-filter bound).
#[test]
fn sinr_only_feasibility_matches_matched_filter_bound() {
    let n = 4;
    let mut sc = base_scenario(n, 0.0, 25.0);
    let mut rng = crate::rng::stream_rng(7, &[5]);
    use rand::Rng;
    let h = ComplexVector::from_fn(n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    sc.users = vec![UserChannelSpec::Explicit(h.clone())];
    let max_sinr = sc.power_budget * h.norm_squared() / sc.noise_user;

    let fam = Families {
        user_sinr: true,
        eve_caps: false,
        floor: false,
        caps: false,
    };
    let solve_at = |gamma: f64| -> bool {
        let mut s = sc.clone();
        s.user_sinr_threshold = gamma;
        let ctx = DesignContext::new(&s, false).unwrap();
        let (prog, _) = build_design_program(&ctx, 0.0, fam, Objective::Feasibility).unwrap();
        let sol = crate::conic::solve(&prog, 1e-7, 50_000).unwrap();
        sol.status == crate::conic::SolveStatus::Optimal
    };
    assert!(solve_at(0.97 * max_sinr), "below the bound must be feasible");
    assert!(!solve_at(1.03 * max_sinr), "above the bound must be infeasible");
}

#[test]
fn huge_threshold_reports_user_sinr_family() {
    let mut sc = base_scenario(8, 10.0, 100.0);
    sc.user_sinr_threshold = 1e12;
    let err = solve_secure_design(&sc).unwrap_err();
    match err {
        Error::Infeasible(rep) => assert_eq!(rep.binding, ConstraintFamily::UserSinr),
        other => panic!("expected infeasibility, got {other:?}"),
    }
}

#[test]
fn zero_power_budget_is_infeasible() {
    let mut sc = base_scenario(8, 10.0, 100.0);
    sc.power_budget = 0.0;
    let err = solve_secure_design(&sc).unwrap_err();
    assert!(matches!(err, Error::Infeasible(_)));
}

/// A user colinear with the target couples its SINR to the eavesdropper's:
/// caps below gamma * |alpha|^2 sigma^2 / sigma_E^2 are unreachable.
#[test]
fn colinear_user_defeats_low_eve_caps() {
    let n = 4;
    let geo = ArrayGeometry::half_wavelength(n).unwrap();
    let mut sc = base_scenario(n, 10.0, 50.0);
    let a_t = crate::array::steering_vector(&geo, 0.0).unwrap();
    sc.users = vec![UserChannelSpec::Explicit(a_t)];
    sc.beampattern.floor_fraction = 0.05;
    let gamma = sc.user_sinr_threshold;
    // Gamma_E = Gamma_LU * sigma^2 |alpha|^2 / sigma_E^2 for any beam.
    let coupling_level = gamma * sc.noise_user * sc.target_gain.norm_sqr() / sc.noise_eve;
    let ctx = DesignContext::new(&sc, false).unwrap();
    let solve_at = |t: f64| -> bool {
        let (prog, _) =
            build_design_program(&ctx, t, Families::all(), Objective::Feasibility).unwrap();
        let sol = crate::conic::solve(&prog, 1e-7, 50_000).unwrap();
        sol.status == crate::conic::SolveStatus::Optimal
    };
    assert!(!solve_at(0.5 * coupling_level));
    assert!(solve_at(2.0 * coupling_level));
}

// --- end-to-end designs ----------------------------------------------------

#[test]
fn secure_design_two_users_feasible() {
    let sc = base_scenario(8, 10.0, 100.0);
    let design = solve_secure_design(&sc).unwrap();
    let gamma = sc.user_sinr_threshold;
    for (k, s) in design.achieved.user_sinrs.iter().enumerate() {
        assert!(
            *s >= gamma * (1.0 - 1e-3),
            "user {k} SINR {s} below threshold {gamma}"
        );
    }
    assert!(design.achieved.secrecy_rate > 0.0);
    assert!(design.achieved.total_power <= sc.power_budget * (1.0 + 1e-6));
    for r in &design.covariances {
        assert!(crate::linalg::is_psd(r));
        assert!(crate::linalg::is_hermitian(r, 1e-9));
    }
    // Eavesdropping level respected after recovery (or flagged).
    if !design.flags.contains(&DesignFlag::SdrGap) {
        assert!(design.achieved.eve_sinr <= design.eve_sinr_bound * (1.0 + 1e-3) + 1e-12);
    }
    assert!(design.beamformers.is_some(), "rank-1 recovery expected here");
}

#[test]
fn removed_target_gives_zero_level() {
    let mut sc = base_scenario(8, 10.0, 100.0);
    sc.target_gain = c(0.0, 0.0);
    let design = solve_secure_design(&sc).unwrap();
    assert_eq!(design.eve_sinr_bound, 0.0);
    assert_eq!(design.achieved.eve_sinr, 0.0);
}

/// Relaxing the SINR threshold can only lower the achievable cap.
#[test]
fn level_monotone_in_sinr_threshold() {
    let sc_tight = base_scenario(6, 12.0, 60.0);
    let mut sc_loose = sc_tight.clone();
    sc_loose.user_sinr_threshold = db(6.0);
    let tight = solve_secure_design(&sc_tight).unwrap();
    let loose = solve_secure_design(&sc_loose).unwrap();
    let tol = 2.0 * BISECT_REL_TOL * tight.eve_sinr_bound.max(loose.eve_sinr_bound);
    assert!(
        loose.eve_sinr_bound <= tight.eve_sinr_bound + tol,
        "loose {} vs tight {}",
        loose.eve_sinr_bound,
        tight.eve_sinr_bound
    );
}

/// Doubling every power-like quantity leaves all achieved SINRs unchanged.
#[test]
fn achieved_sinrs_invariant_under_joint_power_scaling() {
    let sc1 = base_scenario(6, 10.0, 80.0);
    let mut sc2 = sc1.clone();
    sc2.power_budget *= 2.0;
    sc2.noise_user *= 2.0;
    sc2.noise_eve *= 2.0;
    sc2.noise_radar *= 2.0;
    let d1 = solve_secure_design(&sc1).unwrap();
    let d2 = solve_secure_design(&sc2).unwrap();
    for (a, b) in d1.achieved.user_sinrs.iter().zip(&d2.achieved.user_sinrs) {
        assert_relative_eq!(a, b, max_relative = 1e-6);
    }
    assert_relative_eq!(
        d1.achieved.eve_sinr,
        d2.achieved.eve_sinr,
        max_relative = 1e-6
    );
}

/// The cap-constrained design never loses secrecy against the
/// eavesdropper-oblivious reference on the same scenario.
#[test]
fn secure_beats_baseline_secrecy() {
    let sc = base_scenario(8, 10.0, 100.0);
    let secure = solve_secure_design(&sc).unwrap();
    let baseline = solve_baseline_design(&sc).unwrap();
    assert!(
        secure.achieved.secrecy_rate >= baseline.achieved.secrecy_rate - 1e-6,
        "secure {} vs baseline {}",
        secure.achieved.secrecy_rate,
        baseline.achieved.secrecy_rate
    );
    // The oblivious design leaks the designated stream toward the target.
    assert!(
        baseline.achieved.eve_sinr_per_stream[0] > secure.achieved.eve_sinr_per_stream[0],
        "baseline eve {} vs secure eve {}",
        baseline.achieved.eve_sinr_per_stream[0],
        secure.achieved.eve_sinr_per_stream[0]
    );
}

// --- rank-1 recovery --------------------------------------------------------

#[test]
fn rank1_recovery_exact_rank_one_input() {
    let sc = base_scenario(4, 6.0, 50.0);
    let ctx = DesignContext::new(&sc, false).unwrap();
    // Build rank-1 covariances aligned with each user's channel, scaled to
    // meet the SINR comfortably.
    let covs: Vec<HermitianMatrix> = (0..2)
        .map(|k| {
            let hk = &ctx.channels.user_channels[k];
            let p = 20.0;
            let mut r = HermitianMatrix::zeros(4, 4);
            for i in 0..4 {
                for j in 0..4 {
                    r[(i, j)] = hk[i] * hk[j].conj() * c(p / hk.norm_squared(), 0.0);
                }
            }
            r
        })
        .collect();
    let mut relaxed_ctx = ctx.clone();
    relaxed_ctx.floor_level_hat = 0.0; // isolate the algebraic recovery
    let w = rank1_recovery(&covs, &relaxed_ctx, 0).unwrap();
    let w = w.expect("rank-1 input must be recoverable");
    for (wk, r) in w.iter().zip(&covs) {
        let mut ww = HermitianMatrix::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                ww[(i, j)] = wk[i] * wk[j].conj();
            }
        }
        assert!((&ww - r).norm() <= 1e-8 * r.norm(), "outer product mismatch");
    }
}

#[test]
fn rank1_recovery_zero_candidates_high_rank_fails() {
    let sc = base_scenario(4, 6.0, 50.0);
    let ctx = DesignContext::new(&sc, false).unwrap();
    // Isotropic (full-rank) covariances: the principal-eigenvector path is
    // rejected by the ratio test and no randomization is allowed.
    let covs: Vec<HermitianMatrix> = (0..2)
        .map(|_| HermitianMatrix::identity(4, 4).map(|e| e * c(10.0, 0.0)))
        .collect();
    let w = rank1_recovery(&covs, &ctx, 0).unwrap();
    assert!(w.is_none());
}

#[test]
fn scenario_validation_rejects_bad_fields() {
    let mut sc = base_scenario(4, 10.0, 10.0);
    sc.beampattern.floor_fraction = 0.0;
    assert!(sc.validate().is_err());
    let mut sc2 = base_scenario(4, 10.0, 10.0);
    sc2.designated_stream = 5;
    assert!(sc2.validate().is_err());
    let mut sc3 = base_scenario(4, 10.0, 10.0);
    sc3.modulation_order = 3;
    assert!(sc3.validate().is_err());
}


#[test]
fn dbg_fig3_polish_level_slack() {
    let cfg = crate::config::parse_config_file(std::path::Path::new(
        concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/fig3_interval.cfg"),
    ))
    .unwrap();
    let ctx = DesignContext::new(&cfg.scenario, true).unwrap();
    for t in [0.33341, 0.334, 0.34] {
        let (prog, layout) =
            build_design_program(&ctx, t, Families::all(), Objective::MinPower).unwrap();
        let start = std::time::Instant::now();
        let sol = crate::conic::solve(&prog, 1e-7, 40_000).unwrap();
        let d = crate::linalg::svec_len(layout.embedded_side);
        let mut sinr_min = f64::INFINITY;
        let covs: Vec<crate::linalg::HermitianMatrix> = layout
            .cov_blocks
            .iter()
            .map(|&off| {
                let block = &sol.primal.as_slice()[off..off + d];
                let e = crate::linalg::smat(block, layout.embedded_side);
                crate::conic::unembed_hermitian(&e)
            })
            .collect();
        for k in 0..4 {
            let mut scaled = ctx.channels.clone();
            scaled.noise_power_user = ctx.sigma2_hat;
            sinr_min = sinr_min.min(user_sinr_cov(&covs, k, &scaled));
        }
        eprintln!(
            "t={t}: status {:?} res ({:.1e},{:.1e},{:.1e}) iters {} in {:.1}s min-SINR {:.1}",
            sol.status,
            sol.primal_residual,
            sol.dual_residual,
            sol.gap,
            sol.iterations,
            start.elapsed().as_secs_f64(),
            sinr_min
        );
    }
}

#[test]
fn dbg_repair_probe() {
    let cfg = crate::config::parse_config_file(std::path::Path::new(
        concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/fig3_interval.cfg"),
    ))
    .unwrap();
    let ctx = DesignContext::new(&cfg.scenario, true).unwrap();
    let (prog, layout) =
        build_design_program(&ctx, 0.3341, Families::all(), Objective::MinPower).unwrap();
    let settings = crate::conic::SolverSettings {
        tol: FINAL_TOL,
        max_iter: 40_000,
        ..Default::default()
    };
    let (_, warm) = crate::conic::solve_with(&prog, &settings, None).unwrap();
    let side = layout.embedded_side;
    let d = crate::linalg::svec_len(side);
    let covs: Vec<HermitianMatrix> = layout
        .cov_blocks
        .iter()
        .map(|&off| {
            let block = &warm.z.as_slice()[off..off + d];
            let e = crate::linalg::smat(block, side);
            let cx = crate::conic::unembed_hermitian(&e)
                .map(|v| v * Complex64::new(ctx.power_budget, 0.0));
            crate::linalg::project_hermitian_psd(&cx)
        })
        .collect();
    for k in 0..4 {
        eprintln!("pre-repair SINR user {k}: {:.3e}", user_sinr_cov_ctx(&covs, k, &ctx));
    }
    match zero_forcing_repair(&covs, &ctx, 0.3341) {
        Some(fixed) => {
            for k in 0..4 {
                eprintln!("post SINR user {k}: {:.6e}", user_sinr_cov_ctx(&fixed, k, &ctx));
            }
            let noise_eve = ctx.sigma_e2_hat * ctx.power_budget;
            for (l, g) in ctx.eve_samples.iter().enumerate() {
                for k in 0..4 {
                    eprintln!("  eve[{l}][{k}] = {:.4}", eve_sinr_cov(&fixed, k, g, noise_eve));
                }
            }
        }
        None => {
            eprintln!("repair REJECTED — checking sub-verifications manually");
            // replicate pieces
            let gamma = ctx.gamma;
            let sigma2 = ctx.sigma2_hat * ctx.power_budget;
            eprintln!("gamma {gamma} sigma2 {sigma2}");
        }
    }
}
