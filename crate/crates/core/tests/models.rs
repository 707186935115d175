use nalgebra::DMatrix;
use tailcvar::{
    joint_pdf, pareto_var_closed_form, sample_pareto_matrix, sample_t_copula_matrix, ParetoModel,
    TCopulaParetoModel, TailIndexVector,
};

fn survival(col: &[f64], x: f64) -> f64 {
    col.iter().filter(|&&v| v > x).count() as f64 / col.len() as f64
}

fn quantile(col: &[f64], p: f64) -> f64 {
    let mut v = col.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v[((v.len() as f64) * p).ceil() as usize - 1]
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_unstable_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    for (rank, &i) in idx.iter().enumerate() {
        r[i] = rank as f64;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let m = (n - 1.0) / 2.0;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - m) * (y - m)).sum();
    let var: f64 = ra.iter().map(|x| (x - m).powi(2)).sum();
    cov / var
}

/// Kendall tau for continuous data: sort by `a`, count inversions in `b` by
/// merge sort.
fn kendall_tau(a: &[f64], b: &[f64]) -> f64 {
    let mut idx: Vec<usize> = (0..a.len()).collect();
    idx.sort_unstable_by(|&i, &j| a[i].total_cmp(&a[j]));
    let mut seq: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
    let mut buf = seq.clone();
    let discordant = count_inversions(&mut seq, &mut buf);
    let n = a.len() as f64;
    let pairs = n * (n - 1.0) / 2.0;
    (pairs - 2.0 * discordant as f64) / pairs
}

fn count_inversions(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = count_inversions(&mut v[..mid], &mut buf[..mid])
        + count_inversions(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[i] <= v[j] {
            buf[k] = v[i];
            i += 1;
        } else {
            buf[k] = v[j];
            inv += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    inv
}

#[test]
fn kendall_helper_matches_brute_force() {
    let a = [0.3, 1.2, -0.4, 2.2, 0.9, 1.7];
    let b = [1.0, 0.2, -1.0, 3.0, 0.5, 0.1];
    let mut s = 0.0;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            s += f64::signum((a[i] - a[j]) * (b[i] - b[j]));
        }
    }
    let brute = s / 15.0;
    assert!((kendall_tau(&a, &b) - brute).abs() < 1e-15);
}

#[test]
fn pareto_survival_and_quantile() {
    let x = sample_pareto_matrix(&ParetoModel::iid(3.0, 1).unwrap(), 1_000_000, 1).unwrap();
    let col = x.column(0);
    let p = survival(&col, 2.0);
    let se = (0.125f64 * 0.875 / 1e6).sqrt();
    assert!((p - 0.125).abs() < 3.0 * se, "survival at 2 = {p}");
    let q = quantile(&col, 0.99);
    let exact = pareto_var_closed_form(3.0, 0.01).unwrap();
    assert!((q - exact).abs() / exact < 0.03, "0.99 quantile {q}");
}

#[test]
fn scaled_columns_match_survival_law() {
    let model = ParetoModel::new(TailIndexVector::new(vec![3.0, 1.5]).unwrap(), vec![1.0, 2.5]).unwrap();
    let x = sample_pareto_matrix(&model, 1_000_000, 2).unwrap();
    for (k, (&alpha, &scale)) in [3.0, 1.5].iter().zip(&[1.0, 2.5]).enumerate() {
        let col = x.column(k);
        for p in [0.1, 0.01] {
            // threshold with exact survival p, from the scaled closed form
            let t = scale * pareto_var_closed_form(alpha, p).unwrap();
            let emp = survival(&col, t);
            let tol = 3.0 * (p * (1.0 - p) / 1e6).sqrt();
            assert!((emp - p).abs() < tol, "column {k}, p = {p}: {emp}");
        }
    }
}

#[test]
fn sampling_is_pure_in_seed() {
    let m = ParetoModel::iid(2.5, 3).unwrap();
    assert_eq!(sample_pareto_matrix(&m, 100, 5).unwrap(), sample_pareto_matrix(&m, 100, 5).unwrap());
    assert_ne!(sample_pareto_matrix(&m, 100, 5).unwrap(), sample_pareto_matrix(&m, 100, 6).unwrap());
    let c = TCopulaParetoModel::equicorrelated(0.5, 4.0, TailIndexVector::uniform(3.0, 3).unwrap(), vec![1.0; 3])
        .unwrap();
    assert_eq!(sample_t_copula_matrix(&c, 50, 9).unwrap(), sample_t_copula_matrix(&c, 50, 9).unwrap());
}

#[test]
fn joint_pdf_integrates_to_one() {
    // substitute x = 1/y so the unbounded support maps onto (0, 1]²
    let model = ParetoModel::new(TailIndexVector::new(vec![3.0, 2.0]).unwrap(), vec![1.0, 1.0]).unwrap();
    let m = 400;
    let h = 1.0 / m as f64;
    let mut total = 0.0;
    for i in 0..m {
        let y1 = (i as f64 + 0.5) * h;
        for j in 0..m {
            let y2 = (j as f64 + 0.5) * h;
            total += joint_pdf(&model, &[1.0 / y1, 1.0 / y2]) / (y1 * y1 * y2 * y2) * h * h;
        }
    }
    assert!((total - 1.0).abs() < 0.01, "integral {total}");
}

#[test]
fn copula_marginals_are_pareto() {
    let c = TCopulaParetoModel::equicorrelated(0.6, 4.0, TailIndexVector::new(vec![3.0, 2.0]).unwrap(), vec![1.0; 2])
        .unwrap();
    let x = sample_t_copula_matrix(&c, 200_000, 3).unwrap();
    for (k, alpha) in [3.0, 2.0].into_iter().enumerate() {
        let col = x.column(k);
        for p in [0.1, 0.01] {
            let t = pareto_var_closed_form(alpha, p).unwrap();
            let emp = survival(&col, t);
            let tol = 3.0 * (p * (1.0 - p) / 2e5).sqrt();
            assert!((emp - p).abs() < tol, "column {k}, p = {p}: {emp}");
        }
    }
}

#[test]
fn one_dimensional_copula_is_plain_pareto() {
    let c = TCopulaParetoModel::new(DMatrix::identity(1, 1), 4.0, TailIndexVector::uniform(3.0, 1).unwrap(), vec![1.0])
        .unwrap();
    let col = sample_t_copula_matrix(&c, 200_000, 4).unwrap().column(0);
    for p in [0.5, 0.1, 0.01] {
        let emp = survival(&col, pareto_var_closed_form(3.0, p).unwrap());
        assert!((emp - p).abs() < 3.0 * (p * (1.0 - p) / 2e5).sqrt());
    }
}

#[test]
fn identity_correlation_has_no_rank_correlation() {
    let c = TCopulaParetoModel::equicorrelated(0.0, 4.0, TailIndexVector::uniform(3.0, 2).unwrap(), vec![1.0; 2])
        .unwrap();
    let x = sample_t_copula_matrix(&c, 100_000, 8).unwrap();
    let rho = spearman(&x.column(0), &x.column(1));
    assert!(rho.abs() < 0.02, "spearman {rho}");
}

#[test]
fn kendall_tau_follows_elliptical_identity() {
    let c = TCopulaParetoModel::equicorrelated(0.9, 4.0, TailIndexVector::uniform(3.0, 2).unwrap(), vec![1.0; 2])
        .unwrap();
    let x = sample_t_copula_matrix(&c, 100_000, 10).unwrap();
    let tau = kendall_tau(&x.column(0), &x.column(1));
    let exact = 2.0 / std::f64::consts::PI * 0.9f64.asin();
    assert!((tau - exact).abs() < 0.03, "tau {tau} vs {exact}");
}
