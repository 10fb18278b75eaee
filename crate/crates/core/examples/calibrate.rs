//! Trains the benchmark arms on one or more seeds and prints AUC-PR,
//! recall and false-positive rate per arm, plus the planted tier mix.
//!
//! cargo run --release --example calibrate -- [key=value ...] [--arms a,b] [--seeds 0,1]
//!
//! Keys without a family prefix override the experiment config; `gbt.*`,
//! `mlp.*` and `logistic.*` override the benchmark model of that family.

use std::time::Instant;

use subcredit::dataset::{BondRecord, GeneratorConfig, UNDISCLOSED};
use subcredit::embeddings::tokenize;
use subcredit::evaluation::{evaluate, spread_baseline};
use subcredit::experiment::{apply_override, prepare, ExperimentConfig};
use subcredit::models::ModelSpec;
use subcredit::rng;

/// Planted tier of each record: 4*TS + 2*TERMS + DISC.
fn tier_of(records: &[BondRecord], g: &GeneratorConfig) -> Vec<usize> {
    let (ta, tb) = g.theme_tokens();
    let (sa, sb) = g.risky_state_groups();
    records
        .iter()
        .map(|r| {
            let toks: Vec<String> = tokenize(&r.description).collect();
            let has = |t: &[&str]| toks.iter().any(|x| t.contains(&x.as_str()));
            let ts = (has(ta) && sa.contains(&r.state.as_str())) || (has(tb) && sb.contains(&r.state.as_str()));
            let terms = (r.duration_years.ln() - g.planted.duration_pivot.ln())
                * (r.macro_.tbill_3m - g.planted.tbill_pivot)
                > 0.0;
            let disc = r.source_of_repayment == UNDISCLOSED;
            usize::from(ts) * 4 + usize::from(terms) * 2 + usize::from(disc)
        })
        .collect()
}

fn tiers(records: &[BondRecord], g: &GeneratorConfig) {
    let mut mass = [0usize; 8];
    let mut pos = [0usize; 8];
    for (r, k) in records.iter().zip(tier_of(records, g)) {
        mass[k] += 1;
        pos[k] += usize::from(r.defaulted);
    }
    let n = records.len() as f64;
    let p: usize = pos.iter().sum();
    for k in (0..8).rev() {
        println!(
            "  tier TS={} TERMS={} DISC={}: mass {:.4}%  positives {:5.1}%  precision {:.3}",
            k >> 2,
            (k >> 1) & 1,
            k & 1,
            100.0 * mass[k] as f64 / n,
            100.0 * pos[k] as f64 / p as f64,
            pos[k] as f64 / mass[k].max(1) as f64
        );
    }
}

fn main() {
    env_logger::init();
    let mut overrides = Vec::new();
    let mut family: Vec<(String, String)> = Vec::new();
    let mut arms = "logistic,gbt,gbt_smote,mlp".to_string();
    let mut seeds = vec![0u64];
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        match a.as_str() {
            "--arms" => arms = args.next().expect("--arms value"),
            "--seeds" => seeds = args.next().expect("--seeds value").split(',').map(|s| s.parse().unwrap()).collect(),
            _ => match a.split_once('.') {
                Some((f, rest)) if ["gbt", "mlp", "logistic"].contains(&f) => family.push((f.into(), rest.into())),
                _ => overrides.push(a),
            },
        }
    }
    let spec_for = |kind: &str| -> ModelSpec {
        let base = subcredit::benchmark::model_spec(kind.parse().unwrap());
        let mut t: toml::Table = toml::Table::try_from(&base).unwrap();
        for (f, o) in &family {
            if f == kind {
                apply_override(&mut t, o).unwrap();
            }
        }
        t.try_into().unwrap()
    };

    for &seed in &seeds {
        let mut table = toml::Table::try_from(subcredit::benchmark::experiment_config(seed, subcredit::models::ModelKind::Mlp)).unwrap();
        for o in &overrides {
            apply_override(&mut table, o).unwrap();
        }
        let cfg: ExperimentConfig = table.try_into().unwrap();
        let t0 = Instant::now();
        let records = subcredit::dataset::generate_synthetic(&cfg.generator_config()).unwrap();
        let prepared = prepare(&records, &cfg).unwrap();
        println!(
            "seed {seed}: {} records, width {}, train {} ({} pos), test {} ({} pos), prep {:.1}s",
            records.len(),
            prepared.train.cols(),
            prepared.train.rows(),
            prepared.train.positives(),
            prepared.test.rows(),
            prepared.test.positives(),
            t0.elapsed().as_secs_f64()
        );
        tiers(&records, &cfg.generator);
        let spreads: Vec<f64> = prepared.test_records.iter().map(|r| r.spread).collect();
        let rep = evaluate("spread", &spread_baseline(&spreads).unwrap(), &prepared.test.labels, 0.5).unwrap();
        println!("  {:<22} auc_pr {:.4} recall {:?}", "spread", rep.auc_pr.unwrap(), rep.recall);

        for arm in arms.split(',') {
            let t = Instant::now();
            let kind = arm.split('_').next().unwrap();
            let smote = arm.contains("smote");
            let noemb = arm.contains("noemb");
            let spec = spec_for(kind).with_seed(rng::derive_seed(seed, "model"));
            let (train, test) = if noemb {
                (prepared.train.without_embeddings(), prepared.test.without_embeddings())
            } else {
                (prepared.train.clone(), prepared.test.clone())
            };
            let sc = smote.then(|| {
                cfg.sampling
                    .smote_config(rng::derive_seed(seed, "smote"))
                    .with_schema_groups(&train.schema)
            });
            let model = spec.fit_oversampled(&train.values, &train.labels, sc.as_ref()).unwrap();
            if std::env::var("TRAINEVAL").is_ok() {
                let ts = model.predict_proba(&train.values).unwrap();
                let r = evaluate("train", &ts, &train.labels, 0.5).unwrap();
                println!("    train auc_pr {:.4} recall {:?} fpr {:?}", r.auc_pr.unwrap(), r.recall, r.false_positive_rate);
            }
            let scores = model.predict_proba(&test.values).unwrap();
            let rep = evaluate(arm, &scores, &test.labels, 0.5).unwrap();
            println!(
                "  {:<22} auc_pr {:.4} recall {:.3} fpr {:.5} ks {:.3} ({:.1}s)",
                arm,
                rep.auc_pr.unwrap(),
                rep.recall.unwrap_or(f64::NAN),
                rep.false_positive_rate.unwrap_or(f64::NAN),
                rep.ks.unwrap_or(f64::NAN),
                t.elapsed().as_secs_f64()
            );
            if std::env::var("TIERS").is_ok() {
                let tt = tier_of(&prepared.test_records, &cfg.generator);
                for k in (0..8).rev() {
                    let (mut n, mut pos, mut fp, mut tp) = (0, 0, 0, 0);
                    for i in 0..tt.len() {
                        if tt[i] == k {
                            n += 1;
                            pos += usize::from(test.labels[i]);
                            let flag = scores[i] >= 0.5;
                            tp += usize::from(flag && test.labels[i]);
                            fp += usize::from(flag && !test.labels[i]);
                        }
                    }
                    println!("    tier {k}: n {n} pos {pos} tp {tp} fp {fp}");
                }
                let (ta, tb) = cfg.generator.theme_tokens();
                for i in 0..tt.len() {
                    if tt[i] == 7 {
                        let r = &prepared.test_records[i];
                        let toks: Vec<String> = tokenize(&r.description).collect();
                        let hits = toks.iter().filter(|x| ta.contains(&x.as_str()) || tb.contains(&x.as_str())).count();
                        println!(
                            "      {} score {:.3} label {} dlog {:+.2} dtb {:+.4} theme {hits}/{} state {}",
                            if scores[i] >= 0.5 { "hit " } else { "MISS" },
                            scores[i],
                            test.labels[i],
                            r.duration_years.ln() - cfg.generator.planted.duration_pivot.ln(),
                            r.macro_.tbill_3m - cfg.generator.planted.tbill_pivot,
                            toks.len(),
                            r.state
                        );
                    }
                }
            }
        }
    }
}
