use facetopo::data::{split, synth_generate, DatasetManifest, Split, SynthConfig};
use facetopo::embedding::EncoderKind;
use facetopo::graph::{preorder_traverse, SpanningTree, TraversalSequence};
use facetopo::neural::{AdamConfig, Checkpoint, FusionMode, Parameters, StreamSelection};
use facetopo::pipeline::{evaluate, fit, train, Prepared, TrainConfig, TrainedModel};

fn tiny_data(samples_per_class: usize, seed: u64) -> DatasetManifest {
    synth_generate(&SynthConfig {
        landmarks: 6,
        samples_per_class,
        image_size: 24,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn small_cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 4,
        hidden: 6,
        fusion_dim: 6,
        encoder: EncoderKind::RandomProjection { dim: 6, seed: 17 },
        ..TrainConfig::default()
    }
}

fn chain(n: usize) -> TraversalSequence {
    let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
    preorder_traverse(&SpanningTree::from_edges(n, &edges, 0).unwrap())
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let data = tiny_data(4, 1);
    let mut cfg = small_cfg(3);
    cfg.adam = AdamConfig { lr: 0.0, ..AdamConfig::default() };
    let prepared = Prepared::new(&data, None, &cfg).unwrap();
    let seq = chain(6);
    let inputs = prepared.train.inputs(&seq).unwrap();
    let trained = facetopo::pipeline::train_prepared(&prepared, &seq, &small_cfg(1)).unwrap();
    let mut model = trained.model.clone();
    let before = model.to_flat();
    fit(&mut model, &inputs, None, &cfg).unwrap();
    assert_eq!(model.to_flat(), before);
}

#[test]
fn single_sample_is_memorized() {
    let data = tiny_data(1, 2);
    let one = data.subset(&[0]);
    let one = DatasetManifest { classes: data.classes, ..one };
    let cfg = TrainConfig { epochs: 200, batch_size: 1, ..TrainConfig::default() };
    let model = train(&one, None, &chain(6), &cfg).unwrap();
    let last = model.history.last().unwrap().train;
    let final_loss = facetopo::pipeline::mean_loss(
        &model.model,
        &Prepared::new(&one, None, &cfg).unwrap().train.inputs(&chain(6)).unwrap(),
    )
    .unwrap();
    assert!(final_loss.objective() < 1e-3, "loss {final_loss:?} (last epoch {last:?})");
}

#[test]
fn training_is_deterministic() {
    let data = tiny_data(6, 3);
    let a = train(&data, None, &chain(6), &small_cfg(3)).unwrap();
    let b = train(&data, None, &chain(6), &small_cfg(3)).unwrap();
    assert_eq!(a.model.to_flat(), b.model.to_flat());
    assert_eq!(a.history, b.history);
}

#[test]
fn zeroed_fused_head_predicts_uniformly() {
    let data = tiny_data(4, 4);
    let mut model = train(&data, None, &chain(6), &small_cfg(2)).unwrap();
    model.model.zero_fused_head();
    for p in model.predict(&data).unwrap() {
        for &q in &p.fused {
            assert!((q - 1.0 / 3.0).abs() < 1e-12);
        }
    }
}

#[test]
fn checkpoint_roundtrip_preserves_predictions() {
    let data = tiny_data(4, 5);
    for (streams, fusion, encoder) in [
        (StreamSelection::default(), FusionMode::Gated, EncoderKind::RandomProjection { dim: 6, seed: 17 }),
        (StreamSelection::default(), FusionMode::Gated, EncoderKind::TinyConv { filters: 3, seed: 17 }),
        (StreamSelection { structure: true, texture: false }, FusionMode::Concat, EncoderKind::Flatten),
    ] {
        let cfg = TrainConfig { streams, fusion, encoder, ..small_cfg(2) };
        let model = train(&data, None, &chain(6), &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("checkpoint.json");
        model.to_checkpoint().save(&path).unwrap();
        let back = TrainedModel::from_checkpoint(&Checkpoint::load(&path).unwrap()).unwrap();
        assert_eq!(back.sequence, model.sequence);
        assert_eq!(back.model.to_flat(), model.model.to_flat());
        assert_eq!(back.predict(&data).unwrap(), model.predict(&data).unwrap());
    }
}

#[test]
fn small_task_is_memorized() {
    let data = tiny_data(8, 6);
    let model = train(&data, None, &chain(6), &small_cfg(120)).unwrap();
    let report = evaluate(&model, &data).unwrap();
    assert!(report.recognition_rate >= 99.0, "RR {}", report.recognition_rate);
}

#[test]
fn evaluation_is_repeatable() {
    let data = split(&tiny_data(10, 7), &[(Split::Train, 0.7), (Split::Test, 0.3)], 1).unwrap();
    let (tr, te) = (data.subset_of(Split::Train), data.subset_of(Split::Test));
    let model = train(&tr, Some(&te), &chain(6), &small_cfg(4)).unwrap();
    assert_eq!(evaluate(&model, &te).unwrap(), evaluate(&model, &te).unwrap());
    assert!(model.history.iter().all(|r| r.val.is_some()));
}

#[test]
fn wrong_sequence_is_rejected() {
    let data = tiny_data(2, 8);
    assert!(train(&data, None, &chain(5), &small_cfg(1)).is_err());
}
