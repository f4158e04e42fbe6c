use mstboot::correlation::symmetric_spectrum;
use mstboot::{
    pair_replica, pearson, row_replica, shrink_to_psd, spectrum, synthesize_panel,
    CorrelationMatrix, ReplicaSeedPolicy, SynthSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cyclic Jacobi rotations until the off-diagonal mass vanishes.
#[allow(clippy::needless_range_loop)]
fn jacobi_eigenvalues(n: usize, values: &[f64]) -> Vec<f64> {
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| values[i * n..(i + 1) * n].to_vec())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut out: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    out.sort_by(f64::total_cmp);
    out
}

fn assert_close(got: &[f64], want: &[f64]) {
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() <= 1e-8, "{g} vs {w}");
    }
}

#[test]
fn matches_jacobi_on_random_symmetric_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [1, 2, 3, 7, 16, 31] {
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.random_range(-1.0..1.0);
                m[i * n + j] = v;
                m[j * n + i] = v;
            }
        }
        assert_close(
            &symmetric_spectrum(n, &m).eigenvalues,
            &jacobi_eigenvalues(n, &m),
        );
    }
}

#[test]
fn matches_jacobi_on_replicas() {
    let (panel, _) = synthesize_panel(&SynthSpec {
        n_elements: 25,
        n_times: 40,
        ..SynthSpec::reference(5)
    })
    .unwrap();
    let seeds = ReplicaSeedPolicy::new(5);
    let check = |c: &CorrelationMatrix| {
        let got = spectrum(c);
        assert_close(&got.eigenvalues, &jacobi_eigenvalues(c.n(), c.values()));
        assert!((got.sum() - c.n() as f64).abs() < 1e-9);
        got
    };
    check(&pearson(&panel).unwrap());
    for b in 0..5 {
        let row = check(&row_replica(&panel, seeds.replica_seed(b)).unwrap());
        assert!(row.min() > -1e-10);
        check(&pair_replica(&panel, seeds.replica_seed(b)).unwrap());
    }
}

#[test]
fn shrinkage_lifts_a_pair_replica_to_the_floor() {
    let (panel, _) = synthesize_panel(&SynthSpec {
        n_elements: 40,
        n_times: 60,
        ..SynthSpec::reference(2)
    })
    .unwrap();
    let seeds = ReplicaSeedPolicy::new(2);
    let replica = (0..20)
        .map(|b| pair_replica(&panel, seeds.replica_seed(b)).unwrap())
        .find(|c| spectrum(c).negative_count() > 0)
        .expect("an indefinite pair replica");
    let lambda = spectrum(&replica).min();
    let floor = 1e-6;
    let (shrunk, alpha) = shrink_to_psd(&replica, floor).unwrap();
    let lifted = jacobi_eigenvalues(shrunk.n(), shrunk.values());
    assert!(
        lifted[0] >= floor - 1e-12 && lifted[0] < floor + 1e-9,
        "{}",
        lifted[0]
    );
    // (1 - a) * lambda + a = floor
    assert!((alpha - (floor - lambda) / (1.0 - lambda)).abs() < 1e-12);
    for i in 0..shrunk.n() {
        assert_eq!(shrunk.get(i, i), 1.0);
    }
}
