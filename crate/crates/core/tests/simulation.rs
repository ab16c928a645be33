//! End-to-end properties of simulated benchmarks.

use mot3d_core::assignment::MatchCriterion;
use mot3d_core::metrics::{clear_counts, EvalSequence};
use mot3d_core::simulator::{simulate, simulate_sequence, SimConfig};
use mot3d_core::tracker::{run_sequence, TrackerConfig};

fn noiseless() -> SimConfig {
    SimConfig {
        sigma_pos: 0.0,
        sigma_size: 0.0,
        sigma_theta: 0.0,
        miss_base: 0.0,
        miss_slope: 0.0,
        fp_rate: 0.0,
        ..SimConfig::default()
    }
}

#[test]
fn false_positive_count_matches_poisson_mean() {
    let cfg = SimConfig::default();
    let sims = simulate(&cfg, 0, 100).unwrap();
    let mut frames = 0usize;
    let mut fps = 0usize;
    for s in &sims {
        for src in &s.sources {
            frames += 1;
            fps += src.iter().filter(|x| x.is_none()).count();
        }
    }
    assert_eq!(frames, 10_000);
    let mean = fps as f64 / frames as f64;
    let sigma = (cfg.fp_rate / frames as f64).sqrt();
    assert!(
        (mean - cfg.fp_rate).abs() <= 3.0 * sigma,
        "mean {mean} vs rate {} (3 sigma = {})",
        cfg.fp_rate,
        3.0 * sigma
    );
}

fn perfect(cfg: &SimConfig, tracker: &TrackerConfig) {
    let c = MatchCriterion::Iou3d(0.5);
    for s in simulate(cfg, 0, 10).unwrap() {
        let gts: Vec<_> = s.sequence.frames.iter().map(|f| f.gts.clone()).collect();
        let r = run_sequence(&s.sequence, None, tracker).unwrap();
        let cc = clear_counts(
            EvalSequence {
                hyps: &r.frames,
                gts: &gts,
            },
            c,
            None,
        );
        assert!(cc.num_gt > 0);
        assert_eq!((cc.fp, cc.fn_, cc.ids), (0, 0, 0), "sequence {}", s.sequence.name);
        assert_eq!(cc.mota(), 1.0);
    }
}

#[test]
fn noiseless_scenes_are_tracked_perfectly() {
    // Objects present from the first frame are reported during the warm-up
    // window, so the default tracker is exact when nothing spawns later.
    let no_births = SimConfig {
        spawn_prob: 0.0,
        ..noiseless()
    };
    perfect(&no_births, &TrackerConfig::default());
    // Later births wait min_hits frames for confirmation; with min_hits = 1
    // every object is reported from its first detection.
    let immediate = TrackerConfig {
        min_hits: 1,
        ..TrackerConfig::default()
    };
    perfect(&noiseless(), &immediate);
}

#[test]
fn generation_is_independent_of_threads() {
    let cfg = SimConfig::default();
    let serial = simulate(&cfg, 40, 4).unwrap();
    let handles: Vec<_> = (0..4u64)
        .map(|k| {
            let cfg = cfg.clone();
            std::thread::spawn(move || simulate_sequence(&cfg, 40 + k).unwrap())
        })
        .collect();
    for (h, s) in handles.into_iter().zip(&serial) {
        let t = h.join().unwrap();
        assert_eq!(t.sequence, s.sequence);
        assert_eq!(t.drift, s.drift);
    }
}

#[test]
fn seeds_change_the_scene() {
    let a = simulate_sequence(&SimConfig::default(), 0).unwrap();
    let b = simulate_sequence(
        &SimConfig {
            seed: 1,
            ..SimConfig::default()
        },
        0,
    )
    .unwrap();
    assert_ne!(a.sequence, b.sequence);
}
