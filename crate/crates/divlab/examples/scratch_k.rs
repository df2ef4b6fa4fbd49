//! Scratch K-sweep check (not part of the deliverable).

use divlab::datagen::{gen_concat_task, ConcatTaskSpec};
use divlab::harness::oracle_split;
use divlab::hypotheses::accuracy;
use divlab::losses::DiversificationConfig;
use divlab::trainers::{disambiguate, train_sequential, train_simultaneous, OracleCriterion, TrainSchedule};
use divlab::ModelSpec;

fn main() {
    let spec = ModelSpec::linear(500, 2).unwrap();
    for (label, r, dbat) in [("DBAT@0.5", 0.5, true), ("DD@0.0", 0.0, false)] {
        for seed in [0u64, 1, 2] {
            let splits = gen_concat_task(&ConcatTaskSpec {
                dim_semantic: 250,
                dim_spurious: 250,
                noise_sigma: 0.5,
                margin: 1.0,
                n_train: 500,
                n_unlabeled: 1000,
                n_test: 800,
                r_u: r,
                seed: seed * 777 + 3,
            })
            .unwrap();
            let (oracle, test) = oracle_split(&splits.d_ood, 0.2);
            let mut row = format!("{label} seed={seed}:");
            for k in [2usize, 3, 4, 5] {
                let set = if dbat {
                    let cfg = DiversificationConfig::dbat(k, 5.0);
                    let sched = TrainSchedule::full_batch(300, 1.0, seed);
                    train_sequential(&spec, &splits.d_t, &splits.d_u, &cfg, &sched, None).unwrap()
                } else {
                    let cfg = DiversificationConfig::divdis(k, 10.0, 0.5, vec![0.5, 0.5]);
                    let sched = TrainSchedule::full_batch(300, 0.3, seed);
                    train_simultaneous(&spec, 0, &splits.d_t, &splits.d_u, &cfg, &sched).unwrap()
                };
                let (bi, _) = disambiguate(&set, &oracle, OracleCriterion::Accuracy).unwrap();
                let best = accuracy(&set.hyps[bi], &test).unwrap();
                row.push_str(&format!(" K{k}={best:.3}"));
            }
            println!("{row}");
        }
    }
}
