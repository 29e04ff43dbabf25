use localizability::constrained::*;
use localizability::fisher::{crlb_unconstrained, fim, NoiseModel, DEFAULT_PINV_TOL};
use localizability::geometry::{build_graph, Configuration, RangingGraph};
use localizability::linalg;
use nalgebra::DVector;

/// Two robots with `per_robot` tags, one single tag, anchors on a box.
fn network(dim: usize, per_robot: usize) -> (RangingGraph, Configuration, RigidBodySet) {
    let q = orientation_dim(dim).unwrap();
    let u = 2 * per_robot + 1;
    let anchors: Vec<Vec<f64>> = if dim == 2 {
        vec![vec![0.0, 0.0], vec![10.0, 0.0], vec![10.0, 10.0], vec![0.0, 10.0]]
    } else {
        vec![
            vec![0.0, 0.0, 0.0],
            vec![10.0, 0.0, 1.0],
            vec![10.0, 10.0, 0.0],
            vec![0.0, 10.0, 2.0],
            vec![5.0, 5.0, 8.0],
        ]
    };
    let k = anchors.len();
    let offsets: Vec<Vec<f64>> = (0..per_robot)
        .map(|i| {
            let a = i as f64 * 2.1;
            let mut v = vec![a.cos(), a.sin()];
            if dim == 3 {
                v.push(0.3 * i as f64);
            }
            v
        })
        .collect();
    let g1 = RigidGroup::new(0, (0..per_robot).collect(), offsets.clone(), vec![0.3; q]);
    let g2 = RigidGroup::new(1, (per_robot..2 * per_robot).collect(), offsets, vec![-0.8; q]);
    let mut set = RigidBodySet::new(dim, u, vec![g1, g2]).unwrap();
    let mut pts = vec![vec![0.0; dim]; u];
    pts[u - 1] = vec![6.0; dim];
    pts[u - 1][0] = 2.5;
    pts.extend(anchors);
    let mut config = Configuration::from_points(dim, &pts).unwrap();
    let mut o1 = vec![3.0; dim];
    o1[1] = 4.0;
    let mut o2 = vec![7.0; dim];
    o2[1] = 5.5;
    let th1 = set.groups[0].theta.clone();
    let th2 = set.groups[1].theta.clone();
    set.write_poses(&mut config, &[RigidPose::new(o1, th1), RigidPose::new(o2, th2)]).unwrap();
    let mut edges = Vec::new();
    for t in 0..u {
        for a in 0..k {
            if (t + a) % 3 != 0 {
                edges.push((t, u + a));
            }
        }
    }
    edges.push((0, per_robot));
    edges.push((1, u - 1));
    edges.push((per_robot + 1, u - 1));
    let graph = build_graph(dim, u, k, &edges).unwrap();
    (graph, config, set)
}

fn j_distance(g: &RangingGraph, c: &Configuration, set: &RigidBodySet, noise: &NoiseModel) -> f64 {
    let f_u = fim(g, c, noise).unwrap().tag_block();
    constrained_crlb(&f_u, &distance_nullspace(set, c).unwrap()).bound.trace()
}

#[test]
fn distance_gradient_matches_finite_differences() {
    for (dim, per) in [(2, 2), (2, 3), (3, 3)] {
        let (g, mut c, set) = network(dim, per);
        // Off the constraint surface as well.
        c.coords_mut()[0] += 0.05;
        let noise = NoiseModel::additive(0.1);
        let mobile: Vec<usize> = (0..g.node_count()).collect();
        let (value, field) =
            constrained_potential_gradient(&set, &g, &c, &noise, ConstraintKind::DistanceOnly, &mobile).unwrap();
        assert!((value - j_distance(&g, &c, &set, &noise)).abs() < 1e-12);
        let h = 1e-6;
        for node in 0..g.node_count() {
            for coord in 0..dim {
                let mut plus = c.clone();
                plus.coords_mut()[dim * node + coord] += h;
                let mut minus = c.clone();
                minus.coords_mut()[dim * node + coord] -= h;
                let fd = (j_distance(&g, &plus, &set, &noise) - j_distance(&g, &minus, &set, &noise)) / (2.0 * h);
                let an = field.get(node).unwrap()[coord];
                let scale = field.norm().max(1e-12);
                assert!((fd - an).abs() < 1e-5 * scale, "dim {dim} node {node} coord {coord}: fd {fd} an {an}");
            }
        }
    }
}

fn j_rp_at(g: &RangingGraph, c: &Configuration, set: &RigidBodySet, noise: &NoiseModel) -> f64 {
    rp_constrained_crlb(g, c, noise, set).unwrap().j_c
}

#[test]
fn rp_gradient_matches_manifold_finite_differences() {
    for (dim, per) in [(2, 2), (2, 3), (3, 3)] {
        let (g, c, set) = network(dim, per);
        let noise = NoiseModel::additive(0.1);
        let q = orientation_dim(dim).unwrap();
        let mobile: Vec<usize> = (0..g.tag_count()).collect();
        let field = rp_potential_gradient(&g, &c, &noise, &set, &mobile).unwrap();
        let grad = field.stacked();
        let h = 1e-6;
        for r in 0..2 {
            let mut probe = set.clone();
            let (_, poses) = probe.project(&c).unwrap();
            for k in 0..dim + q {
                let eval = |eps: f64| -> (f64, DVector<f64>) {
                    let mut s = set.clone();
                    let mut cc = c.clone();
                    let mut ps = poses.clone();
                    if k < dim {
                        ps[r].position[k] += eps;
                    } else {
                        ps[r].theta[k - dim] += eps;
                    }
                    s.write_poses(&mut cc, &ps).unwrap();
                    (j_rp_at(&g, &cc, &s, &noise), cc.head(g.tag_count()))
                };
                let (jp, xp) = eval(h);
                let (jm, xm) = eval(-h);
                let fd = (jp - jm) / (2.0 * h);
                let dir = (xp - xm) / (2.0 * h);
                let an = grad.dot(&dir);
                assert!(
                    (fd - an).abs() < 1e-4 * fd.abs().max(1e-3 * grad.norm()),
                    "dim {dim} per {per} robot {r} dir {k}: fd {fd} an {an}"
                );
            }
        }
    }
}

#[test]
fn global_translation_leaves_bounds_unchanged() {
    let (g, c, set) = network(2, 2);
    let noise = NoiseModel::additive(0.1);
    let mut shifted = c.clone();
    for i in 0..c.len() {
        let p = c.point_vec(i) + DVector::from_vec(vec![3.0, -7.0]);
        shifted.set_point(i, p.as_slice());
    }
    let a = j_distance(&g, &c, &set, &noise);
    let b = j_distance(&g, &shifted, &set, &noise);
    assert!((a - b).abs() < 1e-10 * a);
    let a = j_rp_at(&g, &c, &set, &noise);
    let b = j_rp_at(&g, &shifted, &set, &noise);
    assert!((a - b).abs() < 1e-10 * a);
}

#[test]
fn psd_chain_rp_distance_unconstrained() {
    for (dim, per) in [(2, 2), (2, 3), (3, 3)] {
        let (g, c, set) = network(dim, per);
        let noise = NoiseModel::additive(0.1);
        let f_u = fim(&g, &c, &noise).unwrap().tag_block();
        let free = crlb_unconstrained(&f_u, DEFAULT_PINV_TOL).bound;
        let rp = rp_constrained_crlb(&g, &c, &noise, &set).unwrap();
        assert!(!rp.pseudo_inverse);
        let min_eig = |m: nalgebra::DMatrix<f64>| linalg::sym_eigen_sorted(&linalg::symmetrize(&m)).0[0];
        if per >= dim {
            let dist = constrained_crlb(&f_u, &distance_nullspace(&set, &c).unwrap()).bound;
            assert!(min_eig(&free - &dist) >= -1e-9);
            assert!(min_eig(&dist - &rp.position_bound) >= -1e-9);
            assert!(rp.j_c <= dist.trace() + 1e-9);
        }
        assert!(min_eig(&free - &rp.position_bound) >= -1e-9);
        assert!(rp.j_c < free.trace());
        assert!(rp.theta_bound.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn distance_kernel_on_random_feasible_configs() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let (g, mut c, mut set) = network(3, 3);
        let _ = g;
        let poses: Vec<RigidPose> = (0..2)
            .map(|_| {
                RigidPose::new(
                    (0..3).map(|_| rng.random_range(-5.0..5.0)).collect(),
                    (0..3).map(|_| rng.random_range(-2.0..2.0)).collect(),
                )
            })
            .collect();
        set.write_poses(&mut c, &poses).unwrap();
        let (res, jac) = distance_constraints(&set, &c).unwrap();
        assert!(res.amax() < 1e-10);
        assert!((&jac * distance_nullspace(&set, &c).unwrap()).amax() < 1e-10);
        let sys = rp_constraints(&set, &c).unwrap();
        assert!(sys.residual.amax() < 1e-10);
        assert!((&sys.jacobian * &sys.a_rp).amax() < 1e-10);
    }
}

#[test]
fn primal_dual_decreases_potential() {
    let (g, c, set) = network(2, 2);
    let mut projector = set.clone();
    let noise = NoiseModel::additive(0.1);
    let mobile: Vec<usize> = (0..g.tag_count()).collect();
    let (count, _) = distance_constraints(&set, &c).unwrap();
    let mut state = PrimalDualState::new(c, count.len(), 0.5);
    let objective = |cfg: &Configuration| {
        let (_, f) = constrained_potential_gradient(&set, &g, cfg, &noise, ConstraintKind::DistanceOnly, &mobile)?;
        Ok(f)
    };
    let constraints = |cfg: &Configuration| distance_constraints(&set, cfg);
    let initial = objective(&state.config).unwrap().value;
    for _ in 0..100 {
        state = primal_dual_step(&state, objective, constraints).unwrap();
        // Every iterate is used as a waypoint, hence projected onto rigid poses.
        state.config = projector.project(&state.config).unwrap().0;
    }
    let last = objective(&state.config).unwrap().value;
    assert!(last < initial, "{last} >= {initial}");
    assert!(distance_constraints(&set, &state.config).unwrap().0.amax() < 0.5);
}
