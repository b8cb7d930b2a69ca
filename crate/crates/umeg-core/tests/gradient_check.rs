//! Central finite-difference checks of the hand-written backward passes.
//!
//! A scalar loss is evaluated twice per parameter entry at +/- h and the
//! difference quotient is compared against the analytic gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use umeg_core::data::{EntityLayout, EventLabel};
use umeg_core::distill::{RasterClip, StudentConfig, StudentModel, StudentSpotter, RASTER_CHANNELS};
use umeg_core::graph::{build_topology, EntityConfig, GraphSequence, GraphTopology, SportProfile};
use umeg_core::net::{BlockConfig, UmegModel};
use umeg_core::spot::{loss_and_grads, SpotterModel};

const H: f64 = 1e-5;
const MAX_REL_ERR: f64 = 1e-4;

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Six-node toy topology: a small chain with a ball-like hub, exercising an
/// irregular degree profile.
fn tiny_topology() -> GraphTopology {
    // Use a real builder output, then shrink by hand: keep structure simple by
    // building a custom adjacency directly.
    let layout = EntityLayout::new(2, 17, true, 4).unwrap();
    let full = build_topology(&layout, SportProfile::Racket, EntityConfig::PoseBallCourt).unwrap();
    let v = 6;
    let edges = [(0usize, 1usize), (1, 2), (2, 3), (3, 4), (4, 5), (1, 4), (0, 5)];
    let mut adjacency = vec![0.0; v * v];
    for i in 0..v {
        adjacency[i * v + i] = 1.0;
    }
    for &(a, b) in &edges {
        adjacency[a * v + b] = 1.0;
        adjacency[b * v + a] = 1.0;
    }
    GraphTopology {
        node_count: v,
        edges: edges.to_vec(),
        adjacency,
        source_indices: (0..v).collect(),
        ..full
    }
}

fn random_sequence(topology: &GraphTopology, frames: usize, seed: u64) -> GraphSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = vec![0.0; frames * topology.node_count * 2];
    for c in coords.iter_mut() {
        *c = rng.random_range(0.0..1.0);
    }
    GraphSequence {
        coords,
        frames,
        topology: topology.clone(),
    }
}

/// Loss = 0.5 * sum(pooled^2): its gradient on the embeddings is the
/// embeddings themselves, isolating the encoder backward.
fn encoder_loss(model: &UmegModel, seq: &GraphSequence) -> f64 {
    let emb = model.embed(seq).unwrap();
    0.5 * emb.data.iter().map(|v| v * v).sum::<f64>()
}

fn check_encoder(config: &BlockConfig, label: &str) {
    let topology = tiny_topology();
    let seq = random_sequence(&topology, 5, 42);
    let mut model = UmegModel::new(&topology, config, 7).unwrap();

    // Move adjacency refinement entries off the ReLU kink: at the zero
    // initialization every non-edge pre-activation is exactly 0, where the
    // true function is non-differentiable and central differences disagree
    // with any subgradient convention.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for p in model.params_mut() {
        if p.name.ends_with("adj_refine") {
            for v in p.value.iter_mut() {
                *v = rng.random_range(0.01..0.05) * if rng.random::<bool>() { 1.0 } else { -1.0 };
            }
        }
    }

    model.zero_grad();
    let (emb, cache) = model.forward(&seq).unwrap();
    let grad_pooled = emb.data.clone();
    model.backward(&seq, &cache, &grad_pooled);

    let analytic: Vec<(String, Vec<f64>)> = model
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.grad.clone()))
        .collect();

    let mut worst = 0.0_f64;
    let mut worst_at = String::new();
    for (pi, (name, grads)) in analytic.iter().enumerate() {
        for entry in 0..grads.len() {
            let original = model.params()[pi].value[entry];
            model.params_mut()[pi].value[entry] = original + H;
            let plus = encoder_loss(&model, &seq);
            model.params_mut()[pi].value[entry] = original - H;
            let minus = encoder_loss(&model, &seq);
            model.params_mut()[pi].value[entry] = original;
            let numeric = (plus - minus) / (2.0 * H);
            let err = relative_error(grads[entry], numeric);
            if err > worst {
                worst = err;
                worst_at = format!("{name}[{entry}]: analytic {} vs numeric {numeric}", grads[entry]);
            }
        }
    }
    assert!(
        worst <= MAX_REL_ERR,
        "{label}: worst relative error {worst} at {worst_at}"
    );
}

#[test]
fn encoder_gradients_match_finite_differences() {
    let config = BlockConfig {
        widths: vec![8, 8],
        alpha: 1.0 / 8.0,
        deltas: vec![1, 2],
        refine_adjacency: false,
        identity_shift: false,
    };
    check_encoder(&config, "plain encoder");
}

#[test]
fn encoder_gradients_with_refinement_and_width_change() {
    let config = BlockConfig {
        widths: vec![8, 10],
        alpha: 1.0 / 8.0,
        deltas: vec![1, 2],
        refine_adjacency: true,
        identity_shift: false,
    };
    check_encoder(&config, "refined encoder with width change");
}

/// Full spotting pipeline on the criterion-scale tiny model: every encoder
/// and head parameter, through the foreground-weighted loss.
#[test]
fn spotter_gradients_through_the_loss() {
    let topology = tiny_topology();
    let seq = random_sequence(&topology, 5, 17);
    let labels = [
        EventLabel { class_id: 1, frame: 1 },
        EventLabel { class_id: 0, frame: 3 },
    ];
    let valid = vec![true; 5];
    let config = BlockConfig {
        widths: vec![8, 8],
        alpha: 1.0 / 8.0,
        deltas: vec![1, 2],
        refine_adjacency: false,
        identity_shift: false,
    };
    let encoder = UmegModel::new(&topology, &config, 3).unwrap();
    let mut model = SpotterModel::new(encoder, 3, 3);

    let loss_of = |model: &SpotterModel| {
        let emb = model.encoder.embed(&seq).unwrap();
        let scores = model.head.forward(&emb);
        loss_and_grads(&scores, &labels, 5.0, &valid, 1.0).loss
    };

    model.zero_grad();
    let (emb, cache) = model.encoder.forward(&seq).unwrap();
    let scores = model.head.forward(&emb);
    let out = loss_and_grads(&scores, &labels, 5.0, &valid, 1.0);
    let grad_emb = model
        .head
        .backward(&emb, &out.grad_loc_logit, &out.grad_cls_logits);
    model.encoder.backward(&seq, &cache, &grad_emb);

    let analytic: Vec<(String, Vec<f64>)> = model
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.grad.clone()))
        .collect();
    let mut worst = 0.0_f64;
    let mut worst_at = String::new();
    for (pi, (name, grads)) in analytic.iter().enumerate() {
        for entry in 0..grads.len() {
            let original = model.params()[pi].value[entry];
            model.params_mut()[pi].value[entry] = original + H;
            let plus = loss_of(&model);
            model.params_mut()[pi].value[entry] = original - H;
            let minus = loss_of(&model);
            model.params_mut()[pi].value[entry] = original;
            let numeric = (plus - minus) / (2.0 * H);
            let err = relative_error(grads[entry], numeric);
            if err > worst {
                worst = err;
                worst_at = format!("{name}[{entry}]");
            }
        }
    }
    assert!(worst <= MAX_REL_ERR, "worst {worst} at {worst_at}");
}

/// Student pipeline: conv stages, bidirectional GRU, projection, and heads,
/// through the spotting loss. Uses a finer step than the graph checks: conv
/// pre-activations sit close enough to the ReLU kink that h = 1e-5 central
/// differences straddle it (the one-sided differences at h <= 1e-6 agree
/// with the analytic gradient to full precision).
#[test]
fn student_gradients_through_the_loss() {
    const H_STUDENT: f64 = 1e-6;
    // Floor the relative-error denominator: gradients near 1e-6 hit the
    // cancellation limit of f64 central differences, where |a - n| stays
    // below 1e-8 but the ratio drifts above the graph-model bar.
    let student_error =
        |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-4);
    let config = StudentConfig {
        image_size: 8,
        conv_channels: [2, 3, 4],
        gru_hidden: 3,
        output_dim: 5,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let frames = 4;
    let raster = RasterClip {
        frames,
        height: 8,
        width: 8,
        data: (0..frames * RASTER_CHANNELS * 64)
            .map(|_| rng.random_range(0.0..1.0))
            .collect(),
    };
    let labels = [EventLabel { class_id: 1, frame: 2 }];
    let valid = vec![true; frames];
    let student = StudentModel::new(&config, 5);
    let mut spotter = StudentSpotter::new(student, 2, 5);

    let loss_of = |s: &StudentSpotter| {
        let emb = s.student.embed(&raster);
        let scores = s.head.forward(&emb);
        loss_and_grads(&scores, &labels, 5.0, &valid, 1.0).loss
    };

    for p in spotter.params_mut() {
        p.zero_grad();
    }
    let (emb, cache) = spotter.student.forward(&raster);
    let scores = spotter.head.forward(&emb);
    let out = loss_and_grads(&scores, &labels, 5.0, &valid, 1.0);
    let grad_emb = spotter
        .head
        .backward(&emb, &out.grad_loc_logit, &out.grad_cls_logits);
    spotter.student.backward(&cache, &grad_emb, true);

    let analytic: Vec<(String, Vec<f64>)> = spotter
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.grad.clone()))
        .collect();
    let mut worst = 0.0_f64;
    let mut worst_at = String::new();
    for (pi, (name, grads)) in analytic.iter().enumerate() {
        for entry in 0..grads.len() {
            let mut central = |h: f64| {
                let original = spotter.params()[pi].value[entry];
                spotter.params_mut()[pi].value[entry] = original + h;
                let plus = loss_of(&spotter);
                spotter.params_mut()[pi].value[entry] = original - h;
                let minus = loss_of(&spotter);
                spotter.params_mut()[pi].value[entry] = original;
                (plus - minus) / (2.0 * h)
            };
            let mut err = student_error(grads[entry], central(H_STUDENT));
            if err > MAX_REL_ERR {
                // A central difference that straddles a ReLU kink is wrong at
                // one step size but not at others; a backward bug is wrong at
                // all of them.
                for h in [3e-7, 3e-6, 1e-7] {
                    err = err.min(student_error(grads[entry], central(h)));
                }
            }
            if err > worst {
                worst = err;
                worst_at = format!("{name}[{entry}]");
            }
        }
    }
    assert!(worst <= MAX_REL_ERR, "worst {worst} at {worst_at}");
}
