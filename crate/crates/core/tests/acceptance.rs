//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `EXPECTED_FAILURES` are reported as FAIL and do not
//! fail the run, but the run does fail if one of them starts passing so the
//! list cannot go stale.

mod oracles;

use std::f64::consts::TAU;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use phasecal::channel::{stacked_mean, synth_observation, ChannelKind, DirectionMode, ModelParams, PilotKind, PilotSequence};
use phasecal::crlb::{closed_form_known_pos_los, closed_form_unknown_pos_los, crlb_numeric, mean_derivatives};
use phasecal::defaults::reference_scenario;
use phasecal::estimators::{
    nllf_bi_los, nllf_bi_twopath, nllf_uni_los, nllf_uni_twopath, GridOptions, MapKnowledge, Param, ParameterVariant,
};
use phasecal::experiments::{run_sweep, run_trial, ScenarioConfig, ScenarioId, SweepSpec};

use oracles::{brute_force_loss, model_columns, rel_err, richardson, with_param};

const EXPECTED_FAILURES: &[u8] = &[7];
const TRIALS: usize = 50;

struct Check {
    pass: bool,
    detail: String,
}

fn reference(bw: f64) -> (phasecal::channel::OfdmConfig, ModelParams) {
    let sc = reference_scenario(bw).unwrap();
    (sc.ofdm, sc.model_params().unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn closed_form_agreement() -> Check {
    let mut worst: f64 = 0.0;
    for bw in [6e6, 24e6, 96e6, 384e6] {
        let (cfg, truth) = reference(bw);
        let snr = cfg.linear_snr(truth.gain_ab);

        let known = crlb_numeric(ParameterVariant::KnownPosLos, &truth, &cfg, MapKnowledge::UNKNOWN, DirectionMode::UniAb).unwrap();
        let (vt, vp) = closed_form_known_pos_los(&cfg, snr);
        worst = worst
            .max(rel(known.bound(Param::ClockOffsetAb).unwrap().variance, vt))
            .max(rel(known.bound(Param::PhaseOffsetAb).unwrap().variance, vp));

        let unknown =
            crlb_numeric(ParameterVariant::UnknownPosLos, &truth, &cfg, MapKnowledge::UNKNOWN, DirectionMode::Bidirectional)
                .unwrap();
        let (vtau, vt2, vp2) = closed_form_unknown_pos_los(&cfg, snr);
        worst = worst
            .max(rel(unknown.bound(Param::DelayAb).unwrap().variance, vtau))
            .max(rel(unknown.bound(Param::ClockOffsetAb).unwrap().variance, vt2))
            .max(rel(unknown.bound(Param::PhaseOffsetAb).unwrap().variance, vp2));
    }
    Check {
        pass: worst <= 1e-6,
        detail: format!("max relative difference {worst:.2e} over W = 6/24/96/384 MHz (tolerance 1e-6)"),
    }
}

fn phase_bound_regression() -> Check {
    let (cfg, truth) = reference(96.06e6);
    let (_, vp) = closed_form_known_pos_los(&cfg, cfg.linear_snr(truth.gain_ab));
    let deg = vp.sqrt().to_degrees();
    let r = rel(deg, 2.6755);
    Check {
        pass: r <= 5e-3,
        detail: format!("std(phase offset) = {deg:.4}° vs 2.6755°, relative {r:.2e} (tolerance 5e-3)"),
    }
}

fn halving_identity() -> Check {
    let mut bws = SweepSpec::default().bandwidths_hz;
    bws.extend([6.12e6, 24.12e6, 96.12e6, 216e6, 336e6, 384.12e6]);
    let mut worst: f64 = 0.0;
    for bw in &bws {
        let (cfg, truth) = reference(*bw);
        let snr = cfg.linear_snr(truth.gain_ab);
        let (vt1, vp1) = closed_form_known_pos_los(&cfg, snr);
        let (_, vt2, vp2) = closed_form_unknown_pos_los(&cfg, snr);
        worst = worst.max((vt1 / vt2 - 2.0).abs()).max((vp1 / vp2 - 2.0).abs());
    }
    Check {
        pass: worst <= 1e-9,
        detail: format!("max |ratio − 2| = {worst:.2e} over {} bandwidths (tolerance 1e-9)", bws.len()),
    }
}

fn compression_oracle() -> Check {
    let mut sc = ScenarioConfig::default();
    sc.pilots = PilotKind::Qpsk { seed: 17 };
    let bw = 33.0 * sc.subcarrier_spacing_hz;
    let scenario = sc.scenario_at(bw).unwrap();
    let cfg = scenario.ofdm;
    assert_eq!(cfg.num_subcarriers(), 33);
    let truth = scenario.model_params().unwrap();
    let obs = synth_observation(&scenario, ChannelKind::TwoPath, DirectionMode::Bidirectional, Some(2024)).unwrap();
    let y_uni = obs.y_ab.clone().unwrap();
    let y_bi = obs.stacked();
    let (pa, pb) = (&obs.pilots_a, &obs.pilots_b);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let span = 3.0 / cfg.bandwidth_hz();
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for _ in 0..100 {
        let tau = truth.delay_ab_s + rng.random_range(-span..span);
        let dt = truth.clock_offset_ab_s + rng.random_range(-span..span);
        let tau_ar = truth.delay_ar_s + rng.random_range(-span..span);
        let refl = rng.random_range(0.0..TAU);
        let t0 = truth.delay_ab_s;

        let cases = [
            (
                nllf_uni_los(dt, &obs, &cfg, t0).unwrap(),
                model_columns(&cfg, ChannelKind::Los, DirectionMode::UniAb, pa, pb, t0, dt, 0.0, 0.0),
                &y_uni,
            ),
            (
                nllf_uni_twopath(dt, tau_ar, refl, &obs, &cfg, t0).unwrap(),
                model_columns(&cfg, ChannelKind::TwoPath, DirectionMode::UniAb, pa, pb, t0, dt, tau_ar, refl),
                &y_uni,
            ),
            (
                nllf_bi_los(tau, dt, &obs, &cfg).unwrap(),
                model_columns(&cfg, ChannelKind::Los, DirectionMode::Bidirectional, pa, pb, tau, dt, 0.0, 0.0),
                &y_bi,
            ),
            (
                nllf_bi_twopath(tau, dt, tau_ar, refl, &obs, &cfg).unwrap(),
                model_columns(&cfg, ChannelKind::TwoPath, DirectionMode::Bidirectional, pa, pb, tau, dt, tau_ar, refl),
                &y_bi,
            ),
        ];
        for (lib, cols, y) in cases {
            let (oracle, _) = brute_force_loss(y, &cols);
            worst = worst.max(rel(lib, oracle));
            points += 1;
        }
    }
    Check {
        pass: worst <= 1e-6,
        detail: format!("{points} evaluations (4 losses × 100 points, N = 33), max relative difference {worst:.2e} (tolerance 1e-6)"),
    }
}

fn noiseless_recovery() -> Check {
    let variants = [
        (ScenarioId::Scenario1KnownPos, ChannelKind::Los),
        (ScenarioId::Scenario1KnownPos, ChannelKind::TwoPath),
        (ScenarioId::Scenario2UnknownPos, ChannelKind::Los),
        (ScenarioId::Scenario2UnknownPos, ChannelKind::TwoPath),
    ];
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    let bandwidths = SweepSpec::default().bandwidths_hz;
    for &bw in &bandwidths {
        for (id, channel) in variants {
            let mut sc = ScenarioConfig::matched(id, channel, MapKnowledge::UNKNOWN);
            sc.noiseless = true;
            let out = run_trial(&sc, bw, None).unwrap();
            let est = &out.estimate;
            let fc = sc.carrier_freq_hz;
            let cell = |p: Param| est.cell_size(p).unwrap_or(0.0);
            for c in &est.grid_cell_sizes {
                let err = out.error(c.param).unwrap().abs();
                // the rotation cell maps to the physical reflection phase
                // together with the delay cells
                let allowed = if c.param == Param::ReflectionPhase {
                    c.value + TAU * fc * (cell(Param::DelayAb) + cell(Param::DelayAr))
                } else {
                    c.value
                };
                worst = worst.max(err / allowed);
            }
            runs += 1;
        }
    }
    Check {
        pass: worst <= 1.0,
        detail: format!(
            "{runs} runs (4 estimators × W = {} MHz), worst |error| / final cell = {worst:.3} (must be ≤ 1)",
            bandwidths.iter().map(|w| format!("{}", w / 1e6)).collect::<Vec<_>>().join("/")
        ),
    }
}

fn monte_carlo_efficiency() -> Check {
    let sc = ScenarioConfig::matched(ScenarioId::Scenario1KnownPos, ChannelKind::Los, MapKnowledge::UNKNOWN);
    let sweep = SweepSpec {
        bandwidths_hz: vec![24e6, 96e6],
        trials: TRIALS,
        report: vec![Param::ClockOffsetAb],
        ..SweepSpec::default()
    };
    let res = run_sweep(&sc, &sweep).unwrap();
    let mut ratios = Vec::new();
    for bw in &sweep.bandwidths_hz {
        let (cfg, truth) = reference(*bw);
        let (vt, _) = closed_form_known_pos_los(&cfg, cfg.linear_snr(truth.gain_ab));
        let rmse = res.record(cfg.bandwidth_hz(), Param::ClockOffsetAb).unwrap().rmse;
        ratios.push((cfg.bandwidth_hz(), rmse / vt.sqrt()));
    }
    Check {
        pass: ratios.iter().all(|(_, r)| (0.8..=2.0).contains(r)),
        detail: ratios
            .iter()
            .map(|(w, r)| format!("RMSE/CRLB = {r:.3} at {:.2} MHz", w / 1e6))
            .collect::<Vec<_>>()
            .join(", ")
            + &format!(" ({TRIALS} trials, band [0.8, 2.0])"),
    }
}

fn threshold_effect() -> Check {
    let mut sc = ScenarioConfig::matched(ScenarioId::Scenario2UnknownPos, ChannelKind::Los, MapKnowledge::UNKNOWN);
    let sweep = SweepSpec {
        bandwidths_hz: vec![96e6, 216e6],
        trials: TRIALS,
        report: vec![Param::DelayAb],
        ..SweepSpec::default()
    };
    let rmse = |sc: &ScenarioConfig| {
        let res = run_sweep(sc, &sweep).unwrap();
        let lo = res.records[0].rmse;
        let hi = res.records[1].rmse;
        (lo, hi)
    };
    let (lo, hi) = rmse(&sc);
    let factor = lo / hi;

    // the same sweep on a delay grid scaled only with bandwidth
    sc.grid = Some(GridOptions {
        resolve_carrier: false,
        ..GridOptions::default()
    });
    let (coarse_lo, coarse_hi) = rmse(&sc);
    sc.noiseless = true;
    let noiseless_miss = run_trial(&sc, 96e6, None).unwrap().error(Param::DelayAb).unwrap();

    Check {
        pass: factor >= 1e3,
        detail: format!(
            "ML estimator: τ_AB RMSE {lo:.3e} s → {hi:.3e} s, collapse ×{factor:.2} (need ≥ 1e3). \
             Bandwidth-scaled grid: {coarse_lo:.3e} s → {coarse_hi:.3e} s (×{:.2e}), but it misses noiseless truth by {noiseless_miss:.3e} s at 96 MHz",
            coarse_lo / coarse_hi
        ),
    }
}

fn mismatch_and_map_ordering() -> Check {
    let sweep = SweepSpec {
        bandwidths_hz: vec![96e6],
        trials: TRIALS,
        report: vec![Param::ClockOffsetAb],
        ..SweepSpec::default()
    };
    let rmse = |sc: &ScenarioConfig| run_sweep(sc, &sweep).unwrap().records[0].rmse;

    let matched = ScenarioConfig::matched(ScenarioId::Scenario1KnownPos, ChannelKind::Los, MapKnowledge::UNKNOWN);
    let mut mismatched = matched.clone();
    mismatched.observation_channel = ChannelKind::TwoPath;
    let (r_match, r_mis) = (rmse(&matched), rmse(&mismatched));

    let known = ScenarioConfig::matched(ScenarioId::Scenario1KnownPos, ChannelKind::TwoPath, MapKnowledge::KNOWN);
    let unknown = ScenarioConfig::matched(ScenarioId::Scenario1KnownPos, ChannelKind::TwoPath, MapKnowledge::UNKNOWN);
    let (r_known, r_unknown) = (rmse(&known), rmse(&unknown));

    Check {
        pass: r_mis > r_match && r_known <= r_unknown,
        detail: format!(
            "(a) LoS estimator δt RMSE {r_mis:.3e} s on two-path data vs {r_match:.3e} s on LoS data; \
             (b) two-path δt RMSE {r_known:.3e} s known map vs {r_unknown:.3e} s unknown map ({TRIALS} trials, 96 MHz)"
        ),
    }
}

fn derivative_check() -> Check {
    let (cfg, truth) = reference(96.06e6);
    let pilots = PilotSequence::constant(&cfg);
    let f_max = cfg.carrier_freq_hz() + 0.5 * cfg.bandwidth_hz();
    let cases = [
        (ParameterVariant::KnownPosLos, MapKnowledge::UNKNOWN, DirectionMode::UniAb),
        (ParameterVariant::KnownPosTwoPath, MapKnowledge::UNKNOWN, DirectionMode::UniAb),
        (ParameterVariant::KnownPosTwoPath, MapKnowledge::KNOWN, DirectionMode::UniAb),
        (ParameterVariant::UnknownPosLos, MapKnowledge::UNKNOWN, DirectionMode::Bidirectional),
        (ParameterVariant::UnknownPosTwoPath, MapKnowledge::UNKNOWN, DirectionMode::Bidirectional),
        (ParameterVariant::UnknownPosTwoPath, MapKnowledge::UNKNOWN, DirectionMode::UniAb),
    ];
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (variant, map, direction) in cases {
        let channel = variant.channel();
        let analytic = mean_derivatives(variant, &truth, &cfg, map, direction, &pilots, &pilots).unwrap();
        for d in analytic {
            let x = d.param.truth(&truth);
            let h = match d.param {
                Param::DelayAb | Param::ClockOffsetAb | Param::DelayAr => 1e-3 / (TAU * f_max),
                Param::PhaseOffsetAb | Param::ReflectionPhase => 1e-3,
                Param::GainAb | Param::GainAr => 1e-3 * x,
            };
            let numeric = richardson(
                |v| stacked_mean(&with_param(&truth, d.param, v), channel, direction, &cfg, &pilots, &pilots),
                x,
                h,
            );
            worst = worst.max(rel_err(&d.vector, &numeric));
            checked += 1;
        }
    }
    Check {
        pass: worst <= 1e-5,
        detail: format!("{checked} derivative vectors at the reference truth, max relative error {worst:.2e} (tolerance 1e-5)"),
    }
}

fn main() -> ExitCode {
    let criteria: [(u8, &str, fn() -> Check); 9] = [
        (1, "closed-form vs numeric bound", closed_form_agreement),
        (2, "phase bound regression at 96.06 MHz", phase_bound_regression),
        (3, "bidirectional halving identity", halving_identity),
        (4, "compression vs brute force", compression_oracle),
        (5, "noiseless recovery", noiseless_recovery),
        (6, "Monte Carlo efficiency", monte_carlo_efficiency),
        (7, "threshold effect", threshold_effect),
        (8, "mismatch and map ordering", mismatch_and_map_ordering),
        (9, "derivatives vs finite differences", derivative_check),
    ];
    let mut bad = 0;
    for (id, name, run) in criteria {
        let start = Instant::now();
        let c = run();
        let expected_fail = EXPECTED_FAILURES.contains(&id);
        let status = match (c.pass, expected_fail) {
            (true, false) => "PASS",
            (false, true) => "FAIL (known)",
            (true, true) => {
                bad += 1;
                "PASS (listed as known failure; update the list)"
            }
            (false, false) => {
                bad += 1;
                "FAIL"
            }
        };
        println!(
            "criterion {id} [{name}]: {status} | {} | {:.1} s",
            c.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if bad == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{bad} criteria did not match their expected outcome");
        ExitCode::FAILURE
    }
}
