use nalgebra::{Matrix3, Point3, Vector3, SVD};

use super::{Pose, SolveError};

/// Second singular value below this fraction of the first means the paired
/// points are (numerically) collinear or coincident.
const RANK_TOLERANCE: f64 = 1e-10;

/// Least-squares rigid alignment: the pose minimizing
/// `sum w_i |R model_i + t - camera_i|^2`, with `det R = +1`.
pub fn kabsch(model: &[Point3<f64>], camera: &[Point3<f64>], weights: Option<&[f64]>) -> Result<Pose, SolveError> {
    assert_eq!(model.len(), camera.len(), "unpaired point sets");
    if let Some(w) = weights {
        assert_eq!(w.len(), model.len(), "one weight per pair");
    }
    if model.len() < 3 {
        return Err(SolveError::Degenerate(format!(
            "{} pairs, need at least 3",
            model.len()
        )));
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let total: f64 = (0..model.len()).map(weight).sum();
    if !(total > 0.0) {
        return Err(SolveError::Degenerate("weights sum to zero".into()));
    }

    let mut model_mean = Vector3::zeros();
    let mut camera_mean = Vector3::zeros();
    for i in 0..model.len() {
        model_mean += model[i].coords * weight(i);
        camera_mean += camera[i].coords * weight(i);
    }
    model_mean /= total;
    camera_mean /= total;

    let mut cross = Matrix3::zeros();
    for i in 0..model.len() {
        let p = model[i].coords - model_mean;
        let q = camera[i].coords - camera_mean;
        cross += (p * weight(i)) * q.transpose();
    }

    let svd = SVD::new(cross, true, true);
    let s = svd.singular_values;
    let mut sorted = [s[0], s[1], s[2]];
    sorted.sort_by(|a, b| b.total_cmp(a));
    if !sorted.iter().all(|v| v.is_finite()) {
        return Err(SolveError::Degenerate("non-finite cross-covariance".into()));
    }
    if !(sorted[0] > 0.0) || sorted[1] <= RANK_TOLERANCE * sorted[0] {
        return Err(SolveError::Degenerate(
            "cross-covariance rank below 2 (collinear or coincident points)".into(),
        ));
    }
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(SolveError::Degenerate("SVD did not converge".into())),
    };
    let v = v_t.transpose();

    // Reflection fix: flip the axis of the smallest singular value.
    let mut fix = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        let smallest = (0..3).min_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap_or(2);
        fix[(smallest, smallest)] = -1.0;
    }
    let rotation = v * fix * u.transpose();
    let translation = camera_mean - rotation * model_mean;
    Ok(Pose::new(rotation, translation))
}

/// `sum |R m + t - c|^2`.
pub fn alignment_cost(pose: &Pose, model: &[Point3<f64>], camera: &[Point3<f64>]) -> f64 {
    model
        .iter()
        .zip(camera)
        .map(|(m, c)| (pose.transform(m) - c).norm_squared())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetra() -> Vec<Point3<f64>> {
        vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(10.0, 0.0, 0.0),
            Point3::new(0.0, 7.0, 0.0),
            Point3::new(1.0, 2.0, 5.0),
        ]
    }

    #[test]
    fn identity_pairs() {
        let pts = tetra();
        let pose = kabsch(&pts, &pts, None).unwrap();
        assert!((pose.rotation - Matrix3::identity()).amax() < 1e-12);
        assert!(pose.translation.norm() < 1e-12);
    }

    #[test]
    fn quarter_turn_about_z() {
        let truth = Pose::from_axis_angle(Vector3::z(), std::f64::consts::FRAC_PI_2, Vector3::new(5.0, 0.0, 0.0));
        let model = tetra();
        let camera: Vec<_> = model.iter().map(|p| truth.transform(p)).collect();
        let pose = kabsch(&model, &camera, None).unwrap();
        assert!((pose.rotation - truth.rotation).amax() < 1e-10);
        assert!((pose.translation - truth.translation).amax() < 1e-10);
    }

    #[test]
    fn mirrored_data_still_yields_a_rotation() {
        let model = tetra();
        let camera: Vec<_> = model.iter().map(|p| Point3::new(-p.x, p.y, p.z)).collect();
        let pose = kabsch(&model, &camera, None).unwrap();
        assert!((pose.rotation.determinant() - 1.0).abs() < 1e-12);
        assert!(pose.is_rotation(1e-9));
    }

    #[test]
    fn collinear_is_degenerate() {
        let line: Vec<_> = (0..3).map(|i| Point3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert!(matches!(kabsch(&line, &line, None), Err(SolveError::Degenerate(_))));
        let same = vec![Point3::new(1.0, 1.0, 1.0); 5];
        assert!(matches!(kabsch(&same, &same, None), Err(SolveError::Degenerate(_))));
        assert!(kabsch(&line[..2], &line[..2], None).is_err());
    }

    #[test]
    fn planar_points_are_fine() {
        let model = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(4.0, 0.0, 0.0),
            Point3::new(0.0, 3.0, 0.0),
            Point3::new(4.0, 3.0, 0.0),
        ];
        let truth = Pose::from_axis_angle(Vector3::new(1.0, 1.0, 0.0), 0.4, Vector3::new(1.0, 2.0, 3.0));
        let camera: Vec<_> = model.iter().map(|p| truth.transform(p)).collect();
        let pose = kabsch(&model, &camera, None).unwrap();
        assert!(pose.rotation_error(&truth) < 1e-10);
    }

    #[test]
    fn zero_weight_ignores_a_pair() {
        let truth = Pose::from_axis_angle(Vector3::x(), 0.3, Vector3::new(0.0, 1.0, 0.0));
        let mut model = tetra();
        let mut camera: Vec<_> = model.iter().map(|p| truth.transform(p)).collect();
        model.push(Point3::new(3.0, 3.0, 3.0));
        camera.push(Point3::new(-50.0, 80.0, 9.0));
        let w = [1.0, 1.0, 1.0, 1.0, 0.0];
        let pose = kabsch(&model, &camera, Some(&w)).unwrap();
        assert!(pose.rotation_error(&truth) < 1e-10);
        assert!(pose.translation_error(&truth) < 1e-10);
    }
}
