use nalgebra::{DMatrix, DVector, Vector3};

use super::bound::{constrained_bound, constrained_gradient, ConstrainedBasis};
use super::rotation::{orientation_dim, rotation_exp};
use super::{RigidBodySet, RigidGroup};
use crate::error::{Error, Result};
use crate::fisher::{fim, NoiseModel};
use crate::geometry::{Configuration, RangingGraph};
use crate::potentials::GradientField;

/// Parameter layout (p_o, p_c, p_s, theta): non-reference tags grouped by
/// robot, reference tags, single tags, orientations.
struct Layout<'a> {
    robots: Vec<&'a RigidGroup>,
    /// (robot index, position in its group, tag) for every non-reference tag.
    others: Vec<(usize, usize, usize)>,
    singles: Vec<usize>,
    n: usize,
    q: usize,
}

impl<'a> Layout<'a> {
    fn new(set: &'a RigidBodySet) -> Result<Self> {
        let n = set.dim;
        let q = orientation_dim(n)?;
        let robots: Vec<&RigidGroup> = set.multi().collect();
        let mut others = Vec::new();
        for (k, g) in robots.iter().enumerate() {
            for (pos, &t) in g.tags.iter().enumerate().skip(1) {
                others.push((k, pos, t));
            }
        }
        let mut singles = set.singles();
        singles.extend(set.groups.iter().filter(|g| g.len() == 1).map(|g| g.tags[0]));
        singles.sort_unstable();
        Ok(Self { robots, others, singles, n, q })
    }

    fn col_ref(&self, k: usize) -> usize {
        self.n * k
    }

    fn col_single(&self, s: usize) -> usize {
        self.n * (self.robots.len() + s)
    }

    fn col_theta(&self, k: usize) -> usize {
        self.n * (self.robots.len() + self.singles.len()) + self.q * k
    }

    fn cols(&self) -> usize {
        self.col_theta(self.robots.len())
    }

    /// Phi = exp([theta]x) p^r_{j 1}.
    fn phi(&self, k: usize, pos: usize) -> Result<DVector<f64>> {
        let g = self.robots[k];
        Ok(rotation_exp(&g.theta, self.n)? * g.relative_offset(pos))
    }

    /// N_theta: W Phi in 2D, [W_x Phi, W_y Phi, W_z Phi] in 3D.
    fn n_theta(&self, phi: &DVector<f64>) -> DMatrix<f64> {
        if self.n == 2 {
            DMatrix::from_column_slice(2, 1, &[-phi[1], phi[0]])
        } else {
            let p = Vector3::new(phi[0], phi[1], phi[2]);
            let mut m = DMatrix::zeros(3, 3);
            for axis in 0..3 {
                let v = Vector3::ith(axis, 1.0).cross(&p);
                for r in 0..3 {
                    m[(r, axis)] = v[r];
                }
            }
            m
        }
    }
}

/// RP constraint data in the (p_o, p_c, p_s, theta) ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct RpSystem {
    /// f_RP, one n-vector per non-reference tag.
    pub residual: DVector<f64>,
    /// Partial Jacobian with respect to (p_c, p_s, theta).
    pub n: DMatrix<f64>,
    /// Full Jacobian [I, N].
    pub jacobian: DMatrix<f64>,
    /// col(-N, I).
    pub a_rp: DMatrix<f64>,
    /// Row of each tag coordinate in the extended parameter vector.
    pub position_rows: Vec<usize>,
}

pub fn rp_constraints(set: &RigidBodySet, config: &Configuration) -> Result<RpSystem> {
    let lay = Layout::new(set)?;
    check(set, config)?;
    let n = lay.n;
    let no = n * lay.others.len();
    let cols = lay.cols();
    let mut residual = DVector::zeros(no);
    let mut nmat = DMatrix::zeros(no, cols);
    for (row, &(k, pos, t)) in lay.others.iter().enumerate() {
        let g = lay.robots[k];
        let phi = lay.phi(k, pos)?;
        let f = config.point(t) - config.point(g.reference()) - &phi;
        residual.rows_mut(n * row, n).copy_from(&f);
        for c in 0..n {
            nmat[(n * row + c, lay.col_ref(k) + c)] = -1.0;
        }
        let nt = lay.n_theta(&phi);
        nmat.view_mut((n * row, lay.col_theta(k)), (n, lay.q)).copy_from(&(-nt));
    }
    let mut jacobian = DMatrix::zeros(no, no + cols);
    jacobian.view_mut((0, 0), (no, no)).fill_with_identity();
    jacobian.view_mut((0, no), (no, cols)).copy_from(&nmat);
    let mut a_rp = DMatrix::zeros(no + cols, cols);
    a_rp.view_mut((0, 0), (no, cols)).copy_from(&(-&nmat));
    a_rp.view_mut((no, 0), (cols, cols)).fill_with_identity();
    let mut position_rows = vec![0; n * set.tag_count];
    for (row, &(_, _, t)) in lay.others.iter().enumerate() {
        for c in 0..n {
            position_rows[n * t + c] = n * row + c;
        }
    }
    for (k, g) in lay.robots.iter().enumerate() {
        for c in 0..n {
            position_rows[n * g.reference() + c] = no + lay.col_ref(k) + c;
        }
    }
    for (s, &t) in lay.singles.iter().enumerate() {
        for c in 0..n {
            position_rows[n * t + c] = no + lay.col_single(s) + c;
        }
    }
    Ok(RpSystem { residual, n: nmat, jacobian, a_rp, position_rows })
}

fn check(set: &RigidBodySet, config: &Configuration) -> Result<()> {
    if config.dim() != set.dim || config.len() < set.tag_count {
        return Err(Error::Dimension("configuration does not match the rigid body set".into()));
    }
    Ok(())
}

/// Position rows of A_RP (tag order) with the derivative entries obtained by
/// substituting Phi = p_j - p_1.
pub fn rp_basis(set: &RigidBodySet, config: &Configuration) -> Result<ConstrainedBasis> {
    let lay = Layout::new(set)?;
    check(set, config)?;
    let n = lay.n;
    let rows = n * set.tag_count;
    let mut a = DMatrix::zeros(rows, lay.cols());
    let mut partials = vec![Vec::new(); rows];
    for (k, g) in lay.robots.iter().enumerate() {
        for c in 0..n {
            a[(n * g.reference() + c, lay.col_ref(k) + c)] = 1.0;
        }
    }
    for (s, &t) in lay.singles.iter().enumerate() {
        for c in 0..n {
            a[(n * t + c, lay.col_single(s) + c)] = 1.0;
        }
    }
    for &(k, pos, t) in &lay.others {
        let g = lay.robots[k];
        let nt = lay.n_theta(&lay.phi(k, pos)?);
        for c in 0..n {
            a[(n * t + c, lay.col_ref(k) + c)] = 1.0;
        }
        a.view_mut((n * t, lay.col_theta(k)), (n, lay.q)).copy_from(&nt);
        for c in 0..n {
            let de = lay.n_theta(&DVector::from_fn(n, |r, _| if r == c { 1.0 } else { 0.0 }));
            for r in 0..n {
                for m in 0..lay.q {
                    let v = de[(r, m)];
                    if v != 0.0 {
                        partials[n * t + c].push((n * t + r, lay.col_theta(k) + m, v));
                        partials[n * g.reference() + c].push((n * t + r, lay.col_theta(k) + m, -v));
                    }
                }
            }
        }
    }
    Ok(ConstrainedBasis { a, partials })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpBound {
    /// Full bound on the extended parameter, (p_o, p_c, p_s, theta) order.
    pub b_rp: DMatrix<f64>,
    /// Position block C B_RP C^T in tag order.
    pub position_bound: DMatrix<f64>,
    /// Orientation block, reported as a diagnostic.
    pub theta_bound: DMatrix<f64>,
    pub j_c: f64,
    pub pseudo_inverse: bool,
}

pub fn rp_constrained_crlb(
    graph: &RangingGraph,
    config: &Configuration,
    noise: &NoiseModel,
    set: &RigidBodySet,
) -> Result<RpBound> {
    let basis = rp_basis(set, config)?;
    let sys = rp_constraints(set, config)?;
    let f_u = fim(graph, config, noise)?.tag_block();
    let cb = constrained_bound(&f_u, &basis)?;
    let b_rp = crate::linalg::symmetrize(&(&sys.a_rp * &cb.fc_inv * sys.a_rp.transpose()));
    let m = b_rp.nrows();
    let qr = m - f_u.nrows();
    let theta_bound = b_rp.view((m - qr, m - qr), (qr, qr)).clone_owned();
    Ok(RpBound { b_rp, position_bound: cb.bound, theta_bound, j_c: cb.value, pseudo_inverse: cb.pseudo_inverse })
}

/// Gradient of J_c = tr(C B_RP C^T) over the mobile nodes; thetas stay fixed.
pub fn rp_potential_gradient(
    graph: &RangingGraph,
    config: &Configuration,
    noise: &NoiseModel,
    set: &RigidBodySet,
    mobile: &[usize],
) -> Result<GradientField> {
    let basis = rp_basis(set, config)?;
    constrained_gradient(graph, config, noise, &basis, mobile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constrained::RigidPose;

    fn setup(dim: usize) -> (RigidBodySet, Configuration) {
        let (offs_a, offs_b, th_a, th_b) = if dim == 2 {
            (
                vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
                vec![vec![0.0, 0.5], vec![0.3, -0.5], vec![-0.4, 0.1]],
                vec![0.4],
                vec![-2.0],
            )
        } else {
            (
                vec![vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.2], vec![0.0, 1.0, 0.0]],
                vec![vec![0.0, 0.5, 0.0], vec![0.3, -0.5, 0.1]],
                vec![0.1, 0.2, 0.3],
                vec![-0.5, 0.4, 1.0],
            )
        };
        let na = offs_a.len();
        let nb = offs_b.len();
        let ga = RigidGroup::new(0, (0..na).collect(), offs_a, th_a.clone());
        let gb = RigidGroup::new(1, (na + 1..na + 1 + nb).collect(), offs_b, th_b.clone());
        let u = na + nb + 1;
        let mut set = RigidBodySet::new(dim, u, vec![ga, gb]).unwrap();
        let mut config = Configuration::new(dim, DVector::from_fn(dim * u, |i, _| 0.1 * i as f64)).unwrap();
        let o = |x: f64| vec![x; dim];
        set.write_poses(&mut config, &[RigidPose::new(o(1.0), th_a), RigidPose::new(o(-2.0), th_b)]).unwrap();
        (set, config)
    }

    #[test]
    fn feasible_pose_has_zero_residual_and_kernel() {
        for dim in [2, 3] {
            let (set, config) = setup(dim);
            let sys = rp_constraints(&set, &config).unwrap();
            assert!(sys.residual.amax() < 1e-12);
            assert!((&sys.jacobian * &sys.a_rp).amax() < 1e-12);
            let q = orientation_dim(dim).unwrap();
            assert_eq!(sys.a_rp.ncols(), (dim + q) * 2 + dim);
            assert_eq!(crate::linalg::rank(&sys.a_rp, 1e-9), sys.a_rp.ncols());
        }
    }

    #[test]
    fn single_robot_two_tags_2d() {
        let g = RigidGroup::new(0, vec![0, 1], vec![vec![0.0, 0.0], vec![2.0, 0.0]], vec![0.7]);
        let mut set = RigidBodySet::new(2, 2, vec![g]).unwrap();
        let mut config = Configuration::new(2, DVector::zeros(4)).unwrap();
        set.write_poses(&mut config, &[RigidPose::new(vec![1.0, 1.0], vec![0.7])]).unwrap();
        let sys = rp_constraints(&set, &config).unwrap();
        assert_eq!(sys.n.shape(), (2, 3));
        let phi = rotation_exp(&[0.7], 2).unwrap() * DVector::from_vec(vec![2.0, 0.0]);
        assert!((sys.n[(0, 2)] + (-phi[1])).abs() < 1e-15);
        assert!((sys.n[(1, 2)] + phi[0]).abs() < 1e-15);
    }

    #[test]
    fn basis_rows_match_full_a_rp() {
        for dim in [2, 3] {
            let (set, config) = setup(dim);
            let sys = rp_constraints(&set, &config).unwrap();
            let basis = rp_basis(&set, &config).unwrap();
            for (i, &r) in sys.position_rows.iter().enumerate() {
                assert_eq!(basis.a.row(i), sys.a_rp.row(r));
            }
        }
    }

    #[test]
    fn coincident_offsets_flag_pseudo_inverse() {
        let g = RigidGroup::new(0, vec![0, 1], vec![vec![0.5, 0.5], vec![0.5, 0.5]], vec![0.0]);
        let set = RigidBodySet::new(2, 2, vec![g]).unwrap();
        let graph = crate::geometry::build_graph(2, 2, 3, &[(0, 2), (0, 3), (0, 4), (1, 2), (1, 3), (1, 4)]).unwrap();
        let config = Configuration::from_points(
            2,
            &[vec![1.0, 1.0], vec![1.0, 1.0], vec![0.0, 0.0], vec![5.0, 0.0], vec![0.0, 5.0]],
        )
        .unwrap();
        let b = rp_constrained_crlb(&graph, &config, &NoiseModel::additive(0.1), &set).unwrap();
        assert!(b.pseudo_inverse);
    }
}
