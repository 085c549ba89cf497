mod common;

use common::{small_dataset, tiny_config};
use molgen::pipeline::{
    budget_counts, generate, ingest_row, make_corpus, parse_dataset, read_generations, run_align, run_diffusion,
    run_joint, run_vae, sample_uncond, split_holdout, stated_ring_property, Checkpoint, EvalMode, RunConfig, Stage,
    Trained, UncondMode, FORMAT_VERSION, NO_RING_CAPTION, RING_CAPTION,
};
use molgen::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn empty_config_is_the_defaults() {
    let c = RunConfig::parse_str("# nothing but a comment\n\n").unwrap();
    assert_eq!(c, RunConfig::default());
    assert_eq!((c.latent_dim, c.t_train, c.t_sample, c.w), (24, 100, 50, 2.0));
}

#[test]
fn config_text_round_trips() {
    let mut c = tiny_config();
    c.seed = 17;
    c.pooled_diversity = true;
    c.uncond_mode = UncondMode::Prior;
    assert_eq!(RunConfig::parse_str(&c.to_text()).unwrap(), c);
}

#[test]
fn config_errors_carry_line_numbers() {
    match RunConfig::parse_str("seed = 1\nbogus = 2\n") {
        Err(Error::Config { line: 2, msg }) => assert!(msg.contains("bogus")),
        other => panic!("{other:?}"),
    }
    match RunConfig::parse_str("\n\nw = heavy") {
        Err(Error::Config { line: 3, .. }) => {}
        other => panic!("{other:?}"),
    }
    assert!(matches!(RunConfig::parse_str("no equals sign"), Err(Error::Config { line: 1, .. })));
    assert!(matches!(RunConfig::parse_str("T_sample = 200"), Err(Error::Config { .. })));
}

#[test]
fn ingestion_drop_reasons() {
    assert_eq!(ingest_row(&format!("{}\tlong", "C".repeat(31))).unwrap_err(), "atom_count");
    assert_eq!(ingest_row("C1CC(\tgarbage").unwrap_err(), "parse");
    assert_eq!(ingest_row("C[Xe]\tnoble").unwrap_err(), "element");
    assert_eq!(ingest_row("CCO").unwrap_err(), "format");
    assert_eq!(ingest_row("CCO\t ").unwrap_err(), "format");
    assert_eq!(ingest_row("CC.O\ttwo pieces").unwrap_err(), "disconnected");
    assert_eq!(ingest_row("C(C)(C)(C)(C)C\tfive bonds").unwrap_err(), "valence");
    let p = ingest_row("OCC\tan alcohol").unwrap();
    assert_eq!((p.smiles.as_str(), p.description.as_str()), ("CCO", "an alcohol"));
}

#[test]
fn dataset_report_counts_every_row() {
    let text = "smiles\tdescription\nCCO\tan alcohol\n\nC1CC(\tgarbage\nCCCC\tbutane\n";
    let d = parse_dataset(text).unwrap();
    assert_eq!((d.report.total, d.report.kept, d.report.dropped_total()), (3, 2, 1));
    assert_eq!(d.report.dropped.get("parse"), Some(&1));
    assert!(matches!(parse_dataset(""), Err(Error::Dataset(_))));
    assert!(matches!(parse_dataset("CCO\tno header\n"), Err(Error::Dataset(_))));
    assert!(matches!(parse_dataset("smiles\tdescription\n"), Err(Error::Dataset(_))));
}

#[test]
fn corpus_captions_state_the_ring_property() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let tsv = make_corpus("c1ccccc1\nCCCC\n# comment\n", &mut rng).unwrap();
    let d = parse_dataset(&tsv).unwrap();
    assert_eq!(d.pairs.len(), 2);
    assert!(d.pairs[0].description.starts_with(RING_CAPTION));
    assert!(d.pairs[1].description.starts_with(NO_RING_CAPTION));
    assert_eq!(stated_ring_property(RING_CAPTION), Some(true));
    assert_eq!(stated_ring_property(NO_RING_CAPTION), Some(false));
    assert_eq!(stated_ring_property("It has two oxygens."), None);
}

fn full_run() -> Trained {
    let cfg = tiny_config();
    let data = small_dataset();
    let (a, _) = run_align(&cfg, &data).unwrap();
    let (v, _) = run_vae(&cfg, &data, Some(&a)).unwrap();
    run_diffusion(&cfg, &data, Some(&v)).unwrap().0
}

#[test]
fn stages_produce_curves_of_the_configured_length() {
    let cfg = tiny_config();
    let data = small_dataset();
    let (a, ca) = run_align(&cfg, &data).unwrap();
    assert_eq!((a.stage(), ca.len()), (Stage::Align, cfg.epochs_align));
    let (v, cv) = run_vae(&cfg, &data, Some(&a)).unwrap();
    assert_eq!((v.stage(), cv.len()), (Stage::Vae, cfg.epochs_vae));
    assert!(v.lineage.aligned);
    let (d, cd) = run_diffusion(&cfg, &data, Some(&v)).unwrap();
    assert_eq!((d.stage(), cd.len()), (Stage::Diffusion, cfg.epochs_diffusion));
    assert!(cd.iter().all(|e| e.train.is_finite() && e.monitor.is_finite()));
    // the second stage leaves the encoders untouched
    assert_eq!(d.models.gin, v.models.gin);
    assert_eq!(d.models.decoder, v.models.decoder);
}

#[test]
fn stage_order_is_enforced() {
    let cfg = tiny_config();
    let data = small_dataset();
    let (a, _) = run_align(&cfg, &data).unwrap();
    for prior in [None, Some(&a)] {
        match run_diffusion(&cfg, &data, prior) {
            Err(e @ Error::StageOrder(_)) => {
                assert!(e.to_string().contains("First Stage"), "{e}");
                assert_eq!(e.category(), "stage_order");
            }
            other => panic!("{:?}", other.map(|_| ())),
        }
    }
    let (j, _) = run_joint(&cfg, &data, Some(&a)).unwrap();
    assert!(j.lineage.joint && j.stage() == Stage::Diffusion);
    // a jointly trained model is not a first-stage checkpoint
    assert!(matches!(run_diffusion(&cfg, &data, Some(&j)), Err(Error::StageOrder(_))));
    let mut bigger = cfg.clone();
    bigger.latent_dim = 6;
    let (v, _) = run_vae(&cfg, &data, Some(&a)).unwrap();
    assert!(matches!(run_diffusion(&bigger, &data, Some(&v)), Err(Error::Config { .. })));
}

#[test]
fn no_align_ablation_starts_from_scratch() {
    let cfg = tiny_config();
    let data = small_dataset();
    let (v, _) = run_vae(&cfg, &data, None).unwrap();
    assert!(!v.lineage.aligned);
    let (j, _) = run_joint(&cfg, &data, None).unwrap();
    assert!(!j.lineage.aligned && j.lineage.joint);
}

#[test]
fn checkpoint_round_trip_is_byte_identical() {
    let t = full_run();
    let json = Checkpoint::new(&t).unwrap().to_json().unwrap();
    let back = Checkpoint::from_json(&json, "mem").unwrap().trained().unwrap();
    assert_eq!(back, t);
    assert_eq!(Checkpoint::new(&back).unwrap().to_json().unwrap(), json);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.json");
    Checkpoint::new(&t).unwrap().save(&path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), json);
    assert_eq!(Checkpoint::load(&path).unwrap().trained().unwrap(), t);
}

#[test]
fn corrupt_checkpoints_are_located() {
    let t = full_run();
    let json = Checkpoint::new(&t).unwrap().to_json().unwrap();
    let cut = &json[..json.len() / 2];
    match Checkpoint::from_json(cut, "half.json") {
        Err(e @ Error::Json { .. }) => {
            let Error::Json { ref path, line, column, .. } = e else { unreachable!() };
            assert_eq!((path.as_str(), line), ("half.json", 1));
            assert!(column > 0);
            assert_eq!(e.exit_code(), 4);
        }
        other => panic!("{:?}", other.map(|_| ())),
    }
    let newer = json.replacen(
        &format!("\"format_version\":{FORMAT_VERSION}"),
        &format!("\"format_version\":{}", FORMAT_VERSION + 1),
        1,
    );
    assert!(matches!(
        Checkpoint::from_json(&newer, "new.json"),
        Err(Error::Version { found, expected }) if found == FORMAT_VERSION + 1 && expected == FORMAT_VERSION
    ));
    // a parameter with the wrong row count
    let mut ck = Checkpoint::new(&t).unwrap();
    ck.params.get_mut("gin").unwrap().get_mut("gin.in.w").unwrap().pop();
    assert!(matches!(ck.trained(), Err(Error::Checkpoint(_))));
}

#[test]
fn training_and_sampling_are_deterministic() {
    let a = Checkpoint::new(&full_run()).unwrap().to_json().unwrap();
    let t = full_run();
    assert_eq!(Checkpoint::new(&t).unwrap().to_json().unwrap(), a);

    let prompts = [RING_CAPTION, NO_RING_CAPTION];
    let g1 = generate(&t, &prompts, 3, 2.0, 7).unwrap();
    let g2 = generate(&t, &prompts, 3, 2.0, 7).unwrap();
    assert_eq!(g1, g2);
    assert_eq!(g1.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 3]);
    let other_seed = generate(&t, &prompts, 3, 2.0, 8).unwrap();
    assert_ne!(
        format!("{:?}", g1.iter().flatten().map(|s| &s.smiles).collect::<Vec<_>>()),
        format!("{:?}", other_seed.iter().flatten().map(|s| &s.smiles).collect::<Vec<_>>())
    );
    let u = sample_uncond(&t, 5, UncondMode::Diffusion, 1).unwrap();
    assert_eq!(u, sample_uncond(&t, 5, UncondMode::Diffusion, 1).unwrap());
    assert_eq!(sample_uncond(&t, 4, UncondMode::Prior, 1).unwrap().len(), 4);
    // with repair on, every decode passes the valence check
    assert!(g1.iter().flatten().chain(&u).all(|s| s.valid));
}

#[test]
fn generation_rejects_empty_prompts() {
    let t = full_run();
    assert!(matches!(generate(&t, &["   "], 1, 2.0, 0), Err(Error::Invalid(_))));
}

#[test]
fn budgets_split_evenly() {
    assert_eq!(budget_counts(10, 3), vec![4, 3, 3]);
    assert_eq!(budget_counts(2, 4), vec![1, 1, 0, 0]);
    assert_eq!(budget_counts(20_000, 7).iter().sum::<usize>(), 20_000);
}

#[test]
fn generation_files_check_their_mode() {
    let cond = "prompt,sample,smiles,valid\na,0,CCO,true\nb,0,CC,true\na,1,not smiles,false\n";
    let g = read_generations(cond, EvalMode::Cond).unwrap();
    assert_eq!(g.prompts.as_deref(), Some(&["a".to_string(), "b".to_string()][..]));
    assert_eq!(g.molecules[0].len(), 2);
    assert!(g.molecules[0][1].is_none());
    assert!(read_generations(cond, EvalMode::Uncond).is_err());
    let uncond = "sample,smiles,valid\n0,CCO,true\n";
    assert!(read_generations(uncond, EvalMode::Cond).is_err());
    assert_eq!(read_generations(uncond, EvalMode::Uncond).unwrap().molecules, vec![vec![Some(
        chem::parse_smiles("CCO").unwrap()
    )]]);
}

#[test]
fn holdout_split_is_disjoint_and_seeded() {
    let d = small_dataset();
    let (train, eval) = split_holdout(&d, 0.25, 3).unwrap();
    assert_eq!(train.pairs.len() + eval.pairs.len(), d.pairs.len());
    assert_eq!(eval.pairs.len(), 10);
    assert!(eval.pairs.iter().all(|e| !train.pairs.contains(e)));
    assert_eq!(split_holdout(&d, 0.25, 3).unwrap().1.pairs, eval.pairs);
}
