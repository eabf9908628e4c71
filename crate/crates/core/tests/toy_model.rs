use spikebench_core::spike::{load_checkpoint, save_checkpoint, train_toy, ModelConfig, ToySrnn};
use spikebench_core::tokenizer::CompoundToken;

fn pattern() -> Vec<CompoundToken> {
    vec![
        CompoundToken::metric(0, Some(9), Some(0)),
        CompoundToken::note(0, 60, 3, 5),
        CompoundToken::note(1, 64, 1, 4),
        CompoundToken::metric(4, Some(9), None),
        CompoundToken::note(4, 67, 3, 5),
        CompoundToken::note(6, 65, 2, 3),
        CompoundToken::metric(8, Some(9), Some(12)),
        CompoundToken::note(9, 62, 4, 6),
    ]
}

fn corpus() -> Vec<Vec<CompoundToken>> {
    vec![pattern().repeat(4)]
}

fn config() -> ModelConfig {
    ModelConfig { hidden: 32, seed: 7, ..ModelConfig::default() }
}

#[test]
fn memorizes_repeated_pattern_reproducibly() {
    let model = ToySrnn::new(config()).unwrap();
    let a = train_toy(&model, &corpus(), 500).unwrap();
    let b = train_toy(&model, &corpus(), 500).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.loss_curve, b.loss_curve);
    let acc = a.model.field_accuracy(&corpus());
    println!("accuracy {acc}, loss {} -> {}", a.loss_curve[0], a.loss_curve.last().unwrap());
    assert!(acc >= 0.9, "accuracy {acc}");
    assert!(a.loss_curve.last().unwrap() <= &a.loss_curve[0]);

    let p = pattern();
    let out = a.model.generate(&p[..1], 15, 1e-6, 0).unwrap();
    let expected: Vec<CompoundToken> = p.iter().cycle().take(15).cloned().collect();
    let matches = out.iter().zip(&expected).filter(|(x, y)| x == y).count();
    println!("greedy matches {matches}/15");
    assert!(matches >= 12);

    let loaded = load_checkpoint(&save_checkpoint(&a.model)).unwrap();
    assert!(loaded.field_accuracy(&corpus()) >= 0.9);
}
