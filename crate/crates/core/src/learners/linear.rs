use super::design::Design;
use super::{Family, LinearModel, TrainConfig};
use crate::dataset::GroupedDataset;
use crate::error::Result;
use nalgebra::{DMatrix, DVector};

/// Weighted least squares with optional ridge penalty `lambda/2 * |gamma|^2`
/// on the standardised coefficients, solved through the normal equations.
pub(crate) fn fit_closed_form(
    dataset: &GroupedDataset,
    config: &TrainConfig,
    lambda: f64,
    family: Family,
) -> Result<LinearModel> {
    let design = Design::centered(dataset, config)?;
    let active: Vec<usize> = (0..design.cols.len()).filter(|&j| design.scale[j] > 0.0).collect();
    let p = active.len();
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    for (a, &ja) in active.iter().enumerate() {
        let ca = &design.cols[ja];
        rhs[a] = ca
            .iter()
            .zip(&design.y)
            .zip(&design.v)
            .map(|((x, y), w)| w * x * y)
            .sum();
        for (b, &jb) in active.iter().enumerate().skip(a) {
            let cb = &design.cols[jb];
            let s: f64 = ca.iter().zip(cb).zip(&design.v).map(|((x, z), w)| w * x * z).sum();
            gram[(a, b)] = s;
            gram[(b, a)] = s;
        }
        gram[(a, a)] += lambda;
    }
    let solution = match gram.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        // rank deficient: minimum-norm least squares solution
        None => gram
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .unwrap_or_else(|_| DVector::zeros(p)),
    };
    let mut gamma = vec![0.0; design.cols.len()];
    for (a, &j) in active.iter().enumerate() {
        gamma[j] = solution[a];
    }
    let (weights, intercepts) = design.unstandardize(&gamma, &design.y_means);
    Ok(LinearModel {
        family,
        weights,
        intercepts,
        lambda,
    })
}

#[cfg(test)]
mod tests {
    use crate::dataset::{GroupedDataset, Instance, Task};
    use crate::learners::{fit_with_lambda, predict, Family, InterceptMode, Intercepts, TrainConfig};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};

    fn dataset(rows: &[(Vec<f64>, f64, &str)]) -> GroupedDataset {
        let inst = rows
            .iter()
            .map(|(x, y, g)| Instance::new(x.clone(), *y, (*g).into()))
            .collect();
        GroupedDataset::new(inst, rows[0].0.len(), Task::Regression).unwrap()
    }

    #[test]
    fn ols_interpolates_noiseless_affine() {
        let rows: Vec<_> = (0..20)
            .map(|i| {
                let x = vec![i as f64 * 0.37 - 2.0, (i * i) as f64 * 0.01];
                let y = 1.5 * x[0] - 2.0 * x[1] + 4.0;
                (x, y, "A")
            })
            .collect();
        let m = fit_with_lambda(&dataset(&rows), &TrainConfig::new(Family::Ols), 0.0).unwrap();
        assert!((m.weights[0] - 1.5).abs() < 1e-10);
        assert!((m.weights[1] + 2.0).abs() < 1e-10);
        let Intercepts::Shared(b) = m.intercepts else { panic!() };
        assert!((b - 4.0).abs() < 1e-10);
    }

    #[test]
    fn per_group_intercepts_match_stacked_solve() {
        // Oracle: explicit design [x, 1{A}, 1{B}] through the normal equations.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut rows = Vec::new();
        for i in 0..60 {
            let g = if i % 3 == 0 { "B" } else { "A" };
            let x: f64 = rng.random_range(-3.0..3.0);
            let off = if g == "A" { -2.0 } else { 5.0 };
            rows.push((vec![x], 0.7 * x + off + rng.random_range(-0.5..0.5), g));
        }
        let cfg = TrainConfig::new(Family::Ols).with_intercept_mode(InterceptMode::PerGroup);
        let m = fit_with_lambda(&dataset(&rows), &cfg, 0.0).unwrap();

        let n = rows.len();
        let xmat = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => rows[i].0[0],
            1 => f64::from(rows[i].2 == "A"),
            _ => f64::from(rows[i].2 == "B"),
        });
        let y = DVector::from_iterator(n, rows.iter().map(|r| r.1));
        let oracle = (xmat.transpose() * &xmat)
            .lu()
            .solve(&(xmat.transpose() * y))
            .expect("full rank");
        assert!((m.weights[0] - oracle[0]).abs() < 1e-10);
        assert!((m.intercept(&"A".into()).unwrap() - oracle[1]).abs() < 1e-10);
        assert!((m.intercept(&"B".into()).unwrap() - oracle[2]).abs() < 1e-10);
    }

    #[test]
    fn constant_weight_scaling_does_not_move_minimizer() {
        let rows: Vec<_> = (0..30)
            .map(|i| {
                let x = i as f64 / 7.0;
                (vec![x], (x * 3.1).sin() + x, if i % 2 == 0 { "A" } else { "B" })
            })
            .collect();
        let ds = dataset(&rows);
        for family in [Family::Ols, Family::Ridge] {
            let base = fit_with_lambda(&ds, &TrainConfig::new(family), 0.3).unwrap();
            let cfg = TrainConfig::new(family)
                .with_group_weight("A".into(), 7.5)
                .with_group_weight("B".into(), 7.5);
            let scaled = fit_with_lambda(&ds, &cfg, 0.3).unwrap();
            assert!((base.weights[0] - scaled.weights[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn ridge_shrinks_and_single_point_is_handled() {
        let rows: Vec<_> = (0..10).map(|i| (vec![i as f64], 2.0 * i as f64, "A")).collect();
        let ds = dataset(&rows);
        let ols = fit_with_lambda(&ds, &TrainConfig::new(Family::Ols), 0.0).unwrap();
        let ridge = fit_with_lambda(&ds, &TrainConfig::new(Family::Ridge), 1.0).unwrap();
        assert!(ridge.weights[0].abs() < ols.weights[0].abs());

        // one instance: no slope information, fit reduces to the mean
        let one = dataset(&[(vec![3.0], 5.0, "A")]);
        let m = fit_with_lambda(&one, &TrainConfig::new(Family::Ols), 0.0).unwrap();
        assert_eq!(m.weights, vec![0.0]);
        assert_eq!(predict(&m, &[100.0], &"A".into()).unwrap(), 5.0);
    }
}
