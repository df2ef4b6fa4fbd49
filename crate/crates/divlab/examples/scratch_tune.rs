//! Scratch tuning harness (not part of the deliverable).

use divlab::datagen::{gen_2d_task, TwoDTaskSpec};
use divlab::hypotheses::{accuracy, agreement, boundary_angle, linear_from_angle, Hypothesis};
use divlab::losses::DiversificationConfig;
use divlab::theory::analytic_h2_divdis_seq;
use divlab::trainers::{train_sequential, train_simultaneous, TrainSchedule};
use divlab::ModelSpec;

fn arg(i: usize, default: f64) -> f64 {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() {
    let spec = ModelSpec::linear(2, 2).unwrap();
    let epochs = arg(1, 400.0) as usize;
    let lr_db = arg(2, 2.0);
    let gain = arg(3, 8.0);
    let alpha_db = arg(4, 5.0);
    let alpha_dd = arg(5, 10.0);
    let lambda = arg(6, 0.5);
    let lr_dd = arg(7, 0.5);

    println!("epochs={epochs} lr_db={lr_db} gain={gain} a_db={alpha_db} a_dd={alpha_dd} lambda={lambda} lr_dd={lr_dd}");
    for seed in [0u64, 1, 2] {
        for r in [0.0, 0.1, 0.25, 0.4, 0.5] {
            let splits = gen_2d_task(&TwoDTaskSpec {
                n_train: 500,
                n_unlabeled: 5000,
                n_test: 2000,
                r,
                seed: seed * 1000 + 7,
            })
            .unwrap();
            let h_sp = Hypothesis::Model(linear_from_angle(0.0, gain).unwrap());

            let sched_db = TrainSchedule::full_batch(epochs, lr_db, seed);
            let dbat = DiversificationConfig::dbat(2, alpha_db);
            let set =
                train_sequential(&spec, &splits.d_t, &splits.d_u, &dbat, &sched_db, Some(h_sp.clone()))
                    .unwrap();
            let a_db = boundary_angle(&set.hyps[1]).unwrap();
            let acc_db = accuracy(&set.hyps[1], &splits.d_ood).unwrap();
            let agr_db = agreement(&set.hyps[0], &set.hyps[1], &splits.d_u).unwrap();

            let sched_dd = TrainSchedule::full_batch(epochs, lr_dd, seed);
            let dd = DiversificationConfig::divdis(2, alpha_dd, lambda, vec![0.5, 0.5]);
            let set2 =
                train_sequential(&spec, &splits.d_t, &splits.d_u, &dd, &sched_dd, Some(h_sp.clone()))
                    .unwrap();
            let a_dd = boundary_angle(&set2.hyps[1]).unwrap();
            let beta = analytic_h2_divdis_seq(r).unwrap();
            let acc_dd = accuracy(&set2.hyps[1], &splits.d_ood).unwrap();
            let fit_dd = set2.train_accuracies[1].unwrap();

            let set3 = train_simultaneous(&spec, 0, &splits.d_t, &splits.d_u, &dd, &sched_dd).unwrap();
            let a0 = boundary_angle(&set3.hyps[0]).unwrap();
            let a1 = boundary_angle(&set3.hyps[1]).unwrap();
            let acc0 = accuracy(&set3.hyps[0], &splits.d_ood).unwrap();
            let acc1 = accuracy(&set3.hyps[1], &splits.d_ood).unwrap();
            let fit0 = set3.train_accuracies[0].unwrap();
            let fit1 = set3.train_accuracies[1].unwrap();

            println!(
                "seed={seed} r={r:4}: DB a={a_db:6.3} acc={acc_db:.3} agr={agr_db:.3} | \
                 DDseq a={a_dd:6.3} beta={beta:5.3} d={:5.3} acc={acc_dd:.3} fit={fit_dd:.3} | \
                 DD a=({a0:6.3},{a1:6.3}) acc=({acc0:.3},{acc1:.3}) fit=({fit0:.2},{fit1:.2})",
                (a_dd - beta).abs()
            );
        }
    }
}
