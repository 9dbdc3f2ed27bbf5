use photostat::model::{alpha_for_mean, coherent_deadtime_pn, excited_state_population};
use photostat::simulator::{
    simulate_coherent_run, simulate_run, stationary_on_fraction, Channel, DetectionConfig, RunConfig, Timetag,
};
use photostat::statistics::{bin_to_pulses, estimate_pn, startstop_histogram, PulseBinning, PulseCountSeries};

const REP_PS: u64 = 500_000;

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn series(cfg: &RunConfig, tags: &[Timetag]) -> PulseCountSeries {
    let b = PulseBinning::new(&cfg.excitation, cfg.detection.reject_window_mult, cfg.n_pulses);
    bin_to_pulses(tags, &b).unwrap()
}

fn quiet(mut cfg: RunConfig) -> RunConfig {
    cfg.detection.dead_time = 0.0;
    cfg.detection.dark_rate = 0.0;
    cfg
}

#[test]
fn detected_mean_is_sigma_eta_plus_gamma() {
    let mut cfg = quiet(RunConfig::reference(3));
    cfg.emitter.isc_prob = 0.0;
    cfg.detection.efficiency = 0.3;
    cfg.detection.background_mean = 0.01;
    cfg.n_pulses = 400_000;
    let sim = simulate_run(&cfg).unwrap();
    let s = series(&cfg, &sim.tags);
    let counts: Vec<f64> = s.counts.iter().map(|&c| c as f64).collect();
    let (mean, se) = mean_and_se(&counts);
    let expect = cfg.emitter.emission_prob * 0.3 + 0.01;
    assert!((mean - expect).abs() < 3.0 * se, "{mean} vs {expect} ± {se}");
}

#[test]
fn on_fraction_tends_to_stationary_value() {
    let mut fractions = Vec::new();
    for seed in 5000..5100 {
        let mut cfg = quiet(RunConfig::reference(seed));
        cfg.emitter.isc_prob = 2e-3;
        cfg.emitter.triplet_lifetime = 25e-6;
        cfg.detection.efficiency = 0.0;
        cfg.detection.background_mean = 0.0;
        cfg.n_pulses = 200_000;
        fractions.push(simulate_run(&cfg).unwrap().truth.on_fraction());
    }
    let cfg = RunConfig::reference(0);
    let mut emitter = cfg.emitter;
    emitter.isc_prob = 2e-3;
    emitter.triplet_lifetime = 25e-6;
    let expect = stationary_on_fraction(&emitter, cfg.excitation.rep_period);
    let (mean, se) = mean_and_se(&fractions);
    assert!((mean - expect).abs() < 3.0 * se, "{mean} vs {expect} ± {se}");
    // q/(p+q) with q = 1/τ_T agrees to first order in τ_rep/τ_T
    let rate_form = (0.5e-6 / 25e-6) / (2e-3 + 0.5e-6 / 25e-6);
    assert!((expect - rate_form).abs() < 1e-3);
}

#[test]
fn coherent_counts_follow_clipped_law() {
    let alpha = alpha_for_mean(0.0462).unwrap();
    let n = 2_000_000u64;
    let det = DetectionConfig {
        dark_rate: 0.0,
        ..DetectionConfig::default()
    };
    let tags = simulate_coherent_run(alpha, 0.5e-6, &det, n, 11).unwrap();
    let b = PulseBinning {
        rep_period_ps: REP_PS,
        reject_window_ps: 28_000,
        n_pulses: n,
    };
    let st = estimate_pn(&bin_to_pulses(&tags, &b).unwrap()).unwrap();
    let law = coherent_deadtime_pn(alpha).unwrap();
    for (measured, p) in [(st.p(1), law.p1), (st.p(2), law.p2)] {
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((measured - p).abs() < 3.0 * se, "{measured} vs {p} ± {se}");
    }
    assert_eq!(st.probabilities.len(), 3);
}

#[test]
fn bright_coherent_pulses_clip_to_two() {
    let tags = simulate_coherent_run(10.0, 0.5e-6, &DetectionConfig::default(), 5_000, 5).unwrap();
    let b = PulseBinning {
        rep_period_ps: REP_PS,
        reject_window_ps: 28_000,
        n_pulses: 5_000,
    };
    let s = bin_to_pulses(&tags, &b).unwrap();
    assert!(s.counts.iter().all(|&c| c <= 2));
    assert!(s.counts.iter().filter(|&&c| c == 2).count() > 4_900);
}

#[test]
fn dead_time_and_distinct_channels_on_reference_run() {
    let cfg = RunConfig::reference(21);
    let sim = simulate_run(&cfg).unwrap();
    let dead = 250_000u64;
    for ch in [Channel::A, Channel::B] {
        let times: Vec<u64> = sim.tags.iter().filter(|t| t.channel == ch).map(|t| t.time_ps).collect();
        assert!(times.windows(2).all(|w| w[1] - w[0] >= dead));
    }
    // dead time exceeds the reject window, so double counts span both arms
    let window = cfg.reject_window_ps();
    let mut in_window: Vec<&Timetag> = Vec::new();
    let mut current = u64::MAX;
    for t in &sim.tags {
        let pulse = t.time_ps / REP_PS;
        if t.time_ps - pulse * REP_PS > window {
            continue;
        }
        if pulse != current {
            in_window.clear();
            current = pulse;
        }
        assert!(in_window.iter().all(|o| o.channel != t.channel), "pulse {pulse}");
        in_window.push(t);
    }
}

#[test]
fn preset_total_counts_match_expectation() {
    let cfg = RunConfig::reference(0);
    let mut totals = Vec::new();
    for seed in 0..100 {
        let run = RunConfig { seed, ..cfg };
        let sim = simulate_run(&run).unwrap();
        totals.push(series(&run, &sim.tags).total() as f64);
    }
    let sigma = excited_state_population(&cfg.excitation).unwrap();
    let on = stationary_on_fraction(&cfg.emitter, cfg.excitation.rep_period);
    let dark = 2.0 * cfg.detection.dark_rate * cfg.detection.reject_window_mult * cfg.excitation.rad_lifetime;
    let per_pulse = sigma * on * cfg.detection.efficiency + cfg.detection.background_mean + dark;
    let expect = per_pulse * cfg.n_pulses as f64;
    let (mean, se) = mean_and_se(&totals);
    assert!((mean - expect).abs() < 3.0 * se, "{mean} vs {expect} ± {se}");
    assert!((expect - 14_900.0).abs() < 3.0 * 14_900f64.sqrt());
}

#[test]
fn ideal_source_has_empty_central_peak() {
    let mut cfg = quiet(RunConfig::reference(4));
    cfg.emitter.isc_prob = 0.0;
    cfg.emitter.emission_prob = 1.0;
    cfg.detection.efficiency = 1.0;
    cfg.detection.background_mean = 0.0;
    cfg.detection.dead_time = 250e-9;
    cfg.n_pulses = 20_000;
    let sim = simulate_run(&cfg).unwrap();
    let h = startstop_histogram(&sim.tags, 1_000, 2_000_000).unwrap();
    assert_eq!(h.central_area(REP_PS), 0);
    assert!(h.side_area(REP_PS, 1) > 1_000.0);
}

#[test]
fn coherent_central_peak_equals_side_peaks() {
    // next-stop pairing thins the side peaks by about the stop-arm click probability, so stay dim
    let tags = simulate_coherent_run(0.05, 0.5e-6, &DetectionConfig::default(), 4_000_000, 6).unwrap();
    let h = startstop_histogram(&tags, 1_000, 2_000_000).unwrap();
    let central = h.central_area(REP_PS) as f64;
    let side = h.side_area(REP_PS, 1);
    assert!((central - side).abs() < 3.0 * side.sqrt(), "{central} vs {side}");
}

#[test]
fn sps_to_coherent_central_area_ratio() {
    let mut cfg = RunConfig::reference(9);
    cfg.n_pulses = 4_000_000;
    let sim = simulate_run(&cfg).unwrap();
    let mean = estimate_pn(&series(&cfg, &sim.tags)).unwrap().mean;
    let coherent =
        simulate_coherent_run(alpha_for_mean(mean).unwrap(), 0.5e-6, &cfg.detection, cfg.n_pulses, 9).unwrap();
    let s = startstop_histogram(&sim.tags, 1_000, 2_000_000).unwrap();
    let c = startstop_histogram(&coherent, 1_000, 2_000_000).unwrap();
    let ratio = s.central_area(REP_PS) as f64 / c.central_area(REP_PS) as f64;
    assert!((ratio - 0.10).abs() < 0.05, "ratio {ratio}");
}
