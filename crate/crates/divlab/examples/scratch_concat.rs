//! Scratch tuning for the concat task (not part of the deliverable).

use divlab::datagen::{gen_concat_task, ConcatTaskSpec};
use divlab::dataset::AUX_SPURIOUS;
use divlab::harness::oracle_split;
use divlab::hypotheses::{accuracy, Hypothesis};
use divlab::losses::DiversificationConfig;
use divlab::trainers::{
    disambiguate, train_erm, train_sequential, train_simultaneous, OracleCriterion, TrainSchedule,
};
use divlab::ModelSpec;

fn arg(i: usize, default: f64) -> f64 {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() {
    let epochs = arg(1, 300.0) as usize;
    let lr = arg(2, 1.0);
    let alpha_db = arg(3, 5.0);
    let alpha_dd = arg(4, 10.0);
    let lambda = arg(5, 0.5);
    let lr_dd = arg(6, 0.3);
    let kmax = arg(7, 2.0) as usize;
    let sigma = arg(8, 1.0);
    let dim_each = arg(9, 500.0) as usize;
    let n_t = arg(10, 300.0) as usize;
    let n_u = arg(11, 600.0) as usize;
    let n_te = arg(12, 500.0) as usize;

    println!(
        "epochs={epochs} lr={lr} a_db={alpha_db} a_dd={alpha_dd} lambda={lambda} lr_dd={lr_dd} \
         k={kmax} sigma={sigma} dim={dim_each}x2 n=({n_t},{n_u},{n_te})"
    );
    let spec = ModelSpec::linear(2 * dim_each, 2).unwrap();

    for seed in [0u64, 1, 2] {
        for r in [0.0, 0.25, 0.5, 0.75, 0.9, 1.0] {
            let splits = gen_concat_task(&ConcatTaskSpec {
                dim_semantic: dim_each,
                dim_spurious: dim_each,
                noise_sigma: sigma,
                margin: 1.0,
                n_train: n_t,
                n_unlabeled: n_u,
                n_test: n_te,
                r_u: r,
                seed: seed * 777 + 3,
            })
            .unwrap();
            let (oracle, test) = oracle_split(&splits.d_ood, 0.2);

            let sched = TrainSchedule::full_batch(epochs, lr, seed);
            let erm = train_erm(&spec, &splits.d_t, &sched).unwrap();
            let erm_acc = accuracy(&erm, &test).unwrap();
            let h_sp_u = Hypothesis::fixed(splits.d_u.aux(AUX_SPURIOUS).unwrap().to_vec(), 2).unwrap();
            let erm_vs_sp_u = divlab::hypotheses::agreement(&erm, &h_sp_u, &splits.d_u).unwrap();

            let dbat = DiversificationConfig::dbat(kmax.max(2), alpha_db);
            let set = train_sequential(&spec, &splits.d_t, &splits.d_u, &dbat, &sched, None).unwrap();
            let (bi, _) = disambiguate(&set, &oracle, OracleCriterion::Accuracy).unwrap();
            let db_best = accuracy(&set.hyps[bi], &test).unwrap();

            let sched_dd = TrainSchedule::full_batch(epochs, lr_dd, seed);
            let dd = DiversificationConfig::divdis(kmax.max(2), alpha_dd, lambda, vec![0.5, 0.5]);
            let set2 = train_simultaneous(&spec, 0, &splits.d_t, &splits.d_u, &dd, &sched_dd).unwrap();
            let (bi2, _) = disambiguate(&set2, &oracle, OracleCriterion::Accuracy).unwrap();
            let dd_best = accuracy(&set2.hyps[bi2], &test).unwrap();
            let fits: Vec<String> = set2
                .train_accuracies
                .iter()
                .map(|a| format!("{:.2}", a.unwrap()))
                .collect();

            println!(
                "seed={seed} r={r:4}: erm={erm_acc:.3} sp={erm_vs_sp_u:.3} | DBAT={db_best:.3} | DD={dd_best:.3} fits={fits:?}"
            );
        }
    }
}
