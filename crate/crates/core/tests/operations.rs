//! Worked examples for each public operation, checked against closed forms or
//! independent evaluations.

use approx::assert_relative_eq;
use cwp_core::chain::FiniteChain;
use cwp_core::exact::metastable::{discrete_comm_height, metastable_sets};
use cwp_core::exact::paths::descending_path;
use cwp_core::exact::spectral::{mixing_time_exact, Spectrum, StartSet, DEFAULT_MAX_DENSE};
use cwp_core::exact::{build_exact_chain, ChainOptions, ProportionsChain};
use cwp_core::landscape::*;
use cwp_core::limit_chain::*;
use cwp_core::model::*;
use cwp_core::potential::*;
use cwp_core::sim::*;
use cwp_core::Exec;

fn chain(q: usize, beta: f64, n: usize, kind: RateKind) -> ProportionsChain {
    build_exact_chain(ModelParams::new(q, beta, n, kind).unwrap(), ChainOptions::default()).unwrap()
}

fn limit(q: usize, beta: f64) -> (LandscapeReport, LimitChain) {
    let r = landscape_report(q, beta).unwrap();
    let lc = build_limit_chain(&r, &metastable_prefactors(&r, RateKind::Sqrt).unwrap()).unwrap();
    (r, lc)
}

#[test]
fn hamiltonian_examples() {
    assert_eq!(hamiltonian(&[2, 2, 2, 2], 3), -2.0);
    assert_eq!(hamiltonian(&[0, 1], 2), -0.5);
    let sigma = [0, 1, 2, 2, 1, 0, 0, 3];
    let h = hamiltonian(&sigma, 4);
    assert!((-4.0..=-1.0).contains(&h));
}

#[test]
fn projection_examples() {
    assert_eq!(counts_of(&[0, 0, 1], 2), vec![2, 1]);
    assert_eq!(counts_of(&[1; 5], 3), vec![0, 5, 0]);
    assert_eq!(counts_of(&[2, 0, 1, 0], 3), counts_of(&[0, 0, 1, 2], 3));
}

#[test]
fn free_energy_examples() {
    let f = free_energy(&[0.5, 0.5], 2.0);
    assert_relative_eq!(f, -0.25 - 0.5 * 2f64.ln(), epsilon = 1e-15);
    assert!(norm(&gradient_chart(&[0.5, 0.5], 2.0)) < 1e-15);
    for beta in [0.5, 2.0, 7.0] {
        assert_eq!(free_energy(&[1.0, 0.0, 0.0], beta), -0.5);
    }
}

#[test]
fn phi_examples() {
    for beta in [1.0, 2.5, 4.0] {
        assert_relative_eq!(phi(1.0, beta), 1.0, epsilon = 1e-15);
        let argmin = golden(|t| phi(t, beta), 1e-6, 1.0);
        assert!((argmin - 1.0 / beta).abs() < 1e-6, "beta {beta}: argmin {argmin}");
        assert!(phi(1e-300, beta) > 100.0 && phi(1e-300, beta) > phi(1e-100, beta));
    }
}

fn golden(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    cwp_core::roots::golden_section_min(f, a, b, 1e-12)
}

#[test]
fn gibbs_weight_examples() {
    let beta = 1.7;
    assert_relative_eq!(log_stationary_weight(&[1, 0], beta), beta / 2.0, epsilon = 1e-14);
    assert_relative_eq!(log_stationary_weight(&[0, 1], beta), beta / 2.0, epsilon = 1e-14);
    assert_relative_eq!(log_stationary_weight(&[3, 1, 2], beta), log_stationary_weight(&[2, 3, 1], beta));
    let pc = chain(2, 2.5, 20, RateKind::Sqrt);
    assert_relative_eq!(pc.chain.stationary.iter().sum::<f64>(), 1.0, epsilon = 1e-13);
}

#[test]
fn site_rate_examples() {
    let counts = [3, 5, 2];
    for beta in [0.5, 3.0] {
        assert_eq!(spin_flip_rate(&counts, 1, 1, beta, RateKind::Sqrt), 1.0);
        for j in 0..3 {
            let s: f64 = (0..3).map(|l| spin_flip_rate(&counts, j, l, beta, RateKind::HeatBath)).sum();
            assert_relative_eq!(s, 1.0, epsilon = 1e-14);
            for l in 0..3 {
                assert!(spin_flip_rate(&counts, j, l, beta, RateKind::Metropolis) <= 1.0);
            }
        }
    }
}

#[test]
fn branch_and_temperature_examples() {
    for q in 2..8 {
        assert_relative_eq!(g_branch(1, q, 1.0 / q as f64), q as f64, epsilon = 1e-12);
    }
    assert!((g_branch(1, 2, 0.5 - 1e-7) - 2.0).abs() < 1e-5);
    // Direct evaluation of g_1(t) = log((1-(q-1)t)/t) / (1 - qt) at q = 3, t = 0.1.
    let direct = (0.8f64 / 0.1).ln() / 0.7;
    assert_relative_eq!(g_branch(1, 3, 0.1), direct, max_relative = 1e-14);
    assert_eq!(critical_temperatures(2).unwrap().beta1, 2.0);
    assert_relative_eq!(critical_temperatures(3).unwrap().beta2.unwrap(), 4.0 * 2f64.ln(), epsilon = 1e-12);
    let t5 = critical_temperatures(5).unwrap();
    assert!(t5.beta1 < t5.beta2.unwrap() && t5.beta2.unwrap() < t5.beta3.unwrap() && t5.beta3.unwrap() < 5.0);
}

#[test]
fn branch_root_examples() {
    for q in [3usize, 4, 5] {
        let (_, v) = branch_roots(q, 1, q as f64).unwrap().unwrap();
        assert_eq!(v, 1.0 / q as f64);
    }
    let b1 = critical_temperatures(3).unwrap().beta1;
    assert!(branch_roots(3, 1, b1 - 0.1).unwrap().is_none());
    assert_eq!(enumerate_critical_points(3, b1 - 0.1).unwrap().len(), 1);
    let (u, v) = branch_roots(3, 1, 3.2).unwrap().unwrap();
    assert!((g_branch(1, 3, u) - 3.2).abs() < 1e-11);
    assert!((g_branch(1, 3, v) - 3.2).abs() < 1e-11);
    let sp = spinodal(3, 1);
    assert!(u < sp.m && sp.m < v);
    assert!(u < 1.0 / 3.2 && 1.0 / 3.2 < 1.0 - 2.0 * u);
}

#[test]
fn critical_point_examples() {
    let b = critical_temperatures(3).unwrap();
    for beta in [0.5 * (b.beta1 + b.beta2.unwrap()), 2.9] {
        let pts = enumerate_critical_points(3, beta).unwrap();
        assert_eq!(pts.len(), 7);
        assert!(pts.iter().all(|p| p.class != CriticalClass::C4));
    }
    let pts = enumerate_critical_points(2, 2.5).unwrap();
    assert_eq!(pts.len(), 3);
    let u1 = point_u1(2, 2.5).unwrap();
    let u2 = point_u(2, 2.5, 1).unwrap();
    assert_relative_eq!(u2[0], 1.0 - u1[0], epsilon = 1e-15);
    assert_relative_eq!(u2[1], 1.0 - u1[1], epsilon = 1e-15);
    for p in &pts {
        assert!(norm(&gradient_chart(&p.x, 2.5)) < 1e-10);
        assert!(norm(&gradient_fd(&p.x, 2.5, 1e-6)) < 1e-8);
    }
}

#[test]
fn landscape_report_examples() {
    let r = landscape_report(2, 2.5).unwrap();
    assert_relative_eq!(r.saddle_height, free_energy(&[0.5, 0.5], 2.5), epsilon = 1e-15);
    assert_relative_eq!(r.depth, r.saddle_height - free_energy(&r.u1, 2.5), epsilon = 1e-15);
    assert!(r.depth > 0.0);
    let t = critical_temperatures(3).unwrap();
    let r3 = landscape_report(3, 0.5 * (t.beta2.unwrap() + 3.0)).unwrap();
    assert_eq!(r3.index_set, vec![1, 2, 3]);
    assert!(r3.eta < r3.depth && r3.eta < r3.depth_hat.unwrap());
    let t5 = critical_temperatures(5).unwrap();
    let r5 = landscape_report(5, 0.5 * (t5.beta3.unwrap() + 5.0)).unwrap();
    assert!(r5.depth > r5.depth_hat.unwrap());
}

#[test]
fn saddle_constant_examples() {
    let (q, beta) = (3, 3.2);
    let omegas: Vec<f64> =
        (0..q).map(|k| saddle_constant(&point_v(q, beta, k).unwrap(), beta, RateKind::Sqrt).unwrap().omega).collect();
    for w in &omegas {
        assert_relative_eq!(*w, omegas[0], max_relative = 1e-10);
    }
    let v1 = point_v1(q, beta).unwrap();
    let ev = product_eigenvalues(&v1, beta, RateKind::Sqrt);
    assert_eq!(ev.iter().filter(|&&l| l < 0.0).count(), 1);
    let sc = saddle_constant(&v1, beta, RateKind::Sqrt).unwrap();
    let oracle = product_eigenvalues_general(&v1, beta, RateKind::Sqrt).into_iter().fold(f64::INFINITY, f64::min);
    assert!(sc.mu > 0.0);
    assert_relative_eq!(sc.mu, -oracle, max_relative = 1e-10);
}

#[test]
fn limit_chain_examples() {
    let (r, lc) = limit(2, 2.5);
    let rate = two_spin_rate(2.5, &r.u1);
    assert_relative_eq!(lc.rates[0][1], rate, max_relative = 1e-10);
    assert_relative_eq!(lc.rates[1][0], rate, max_relative = 1e-10);
    assert_eq!(lc.stationary, vec![0.5, 0.5]);
    for t in [0.0, 0.3, 2.0] {
        assert_relative_eq!(lc.worst_tv(t), 0.5 * (-2.0 * rate * t).exp(), epsilon = 1e-12);
    }
    for d in [0.05, 0.25, 0.45] {
        assert_relative_eq!(lc.mixing_time(d).unwrap(), (1.0 / (2.0 * d)).ln() / (2.0 * rate), max_relative = 1e-8);
    }
    assert_eq!(lc.mixing_time(0.5).unwrap(), 0.0);
    assert!(lc.mixing_time(0.1).unwrap() > lc.mixing_time(0.2).unwrap());

    let t3 = critical_temperatures(3).unwrap();
    let (_, lc3) = limit(3, 0.5 * (t3.beta1 + t3.beta2.unwrap()));
    let zero = lc3.position(0).unwrap();
    for (i, row) in lc3.rates.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if i != j && j != zero {
                assert_eq!(v, 0.0);
            }
        }
    }
    assert_eq!(lc3.stationary[zero], 1.0);

    let (_, lc4) = limit(4, 4.5);
    let off: Vec<f64> = (0..4).flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| lc4.rates[i][j]).collect();
    for v in &off {
        assert_relative_eq!(*v, off[0], max_relative = 1e-10);
    }
    for s in &lc4.stationary {
        assert_relative_eq!(*s, 0.25, epsilon = 1e-15);
    }
    let g = lc4.generator();
    for i in 0..4 {
        assert!(g.row(i).sum().abs() < 1e-12);
        let pg: f64 = (0..4).map(|k| lc4.stationary[k] * g[(k, i)]).sum();
        assert!(pg.abs() < 1e-12);
    }
}

#[test]
fn limit_tv_starts_from_one_minus_pi() {
    let t3 = critical_temperatures(3).unwrap();
    let (_, lc) = limit(3, t3.beta2.unwrap());
    let prof = lc.tv_profile(0.0);
    for (k, tv) in prof.iter().enumerate() {
        assert_relative_eq!(*tv, 1.0 - lc.stationary[k], epsilon = 1e-12);
    }
    let mut prev = lc.worst_tv(0.0);
    for i in 1..20 {
        let cur = lc.worst_tv(i as f64 * 0.5);
        assert!(cur < prev);
        prev = cur;
    }
}

#[test]
fn state_space_examples() {
    let pc = chain(2, 2.5, 2, RateKind::Sqrt);
    assert_eq!(pc.space.states(), &[vec![2, 0], vec![1, 1], vec![0, 2]]);
    let pc = chain(3, 3.2, 40, RateKind::Sqrt);
    assert_eq!(pc.len(), 861);
    for i in 0..pc.len() {
        assert_eq!(pc.space.index(pc.space.state(i)), Some(i));
    }
}

#[test]
fn exact_rate_examples() {
    let beta = 2.5;
    assert_eq!(proportions_rate(&[0, 3, 1], 0, 1, beta, RateKind::Sqrt), 0.0);
    let pc = chain(2, beta, 2, RateKind::Sqrt);
    let from = pc.space.index(&[2, 0]).unwrap();
    let to = pc.space.index(&[1, 1]).unwrap();
    assert_relative_eq!(pc.chain.rate(from, to), (-beta / 4.0).exp(), epsilon = 1e-15);
}

#[test]
fn stationary_matches_null_space() {
    for kind in RateKind::ALL {
        let pc = chain(3, 3.2, 8, kind);
        let n = pc.len();
        let mut g = nalgebra::DMatrix::<f64>::zeros(n, n);
        for e in pc.chain.edges() {
            g[(e.from, e.to)] += e.rate;
            g[(e.from, e.from)] -= e.rate;
        }
        // Left null vector of the generator from the SVD of G^T.
        let svd = g.transpose().svd(false, true);
        let vt = svd.v_t.unwrap();
        let (imin, _) = svd.singular_values.iter().enumerate().fold((0, f64::INFINITY), |a, (i, &s)| if s < a.1 { (i, s) } else { a });
        let v = vt.row(imin);
        let s: f64 = v.iter().sum();
        for i in 0..n {
            assert_relative_eq!(v[i] / s, pc.chain.stationary[i], max_relative = 1e-9);
        }
    }
}

#[test]
fn exact_tv_examples() {
    let pc = chain(3, 3.2, 12, RateKind::Sqrt);
    let sp = Spectrum::new(&pc.chain, DEFAULT_MAX_DENSE).unwrap();
    for x in [0, 17, pc.len() - 1] {
        assert_relative_eq!(sp.tv_from(x, 0.0), 1.0 - pc.chain.stationary[x], epsilon = 1e-10);
        let mut prev = 1.0;
        for i in 0..40 {
            let tv = sp.tv_from(x, 1.5f64.powi(i) * 0.01);
            assert!(tv <= prev + 1e-13);
            prev = tv;
        }
        assert!(sp.tv_from(x, 1e7) < 1e-12);
    }
}

#[test]
fn exact_mixing_examples() {
    let pc = chain(2, 2.5, 8, RateKind::Sqrt);
    let sp = Spectrum::new(&pc.chain, DEFAULT_MAX_DENSE).unwrap();
    let minpi = pc.chain.stationary.iter().cloned().fold(1.0, f64::min);
    let r = mixing_time_exact(&sp, 1.0 - minpi + 1e-9, &StartSet::All, Exec::Sequential).unwrap();
    assert_eq!(r.t_mix, 0.0);
    let t = mixing_time_exact(&sp, 0.25, &StartSet::All, Exec::Sequential).unwrap().t_mix;
    let starts: Vec<usize> = (0..pc.len()).collect();
    let h = t / 1e5;
    let mut k = 0usize;
    while sp.worst_tv(&starts, k as f64 * h, Exec::Sequential).0 > 0.25 {
        k += 1;
    }
    let tg = k as f64 * h;
    assert!(t <= tg * (1.0 + 1e-6) && t > tg - h * (1.0 + 1e-6), "t={t} grid={tg}");
    let mut prev = f64::INFINITY;
    for d in [0.05, 0.1, 0.2, 0.3, 0.4] {
        let v = mixing_time_exact(&sp, d, &StartSet::All, Exec::Sequential).unwrap().t_mix;
        assert!(v < prev);
        prev = v;
    }
}

#[test]
fn valley_examples() {
    let t = critical_temperatures(3).unwrap();
    let beta = 0.5 * (t.beta2.unwrap() + 3.0);
    let r = landscape_report(3, beta).unwrap();
    let pc = chain(3, beta, 30, RateKind::Sqrt);
    let sets = metastable_sets(&pc, &r, None, None).unwrap();
    assert_eq!(sets.labels(), vec![0, 1, 2, 3]);
    let mut seen = vec![false; pc.len()];
    for (v, a) in sets.valleys.iter().zip(&sets.attractors) {
        assert!(!v.states.is_empty());
        assert!(v.states.contains(&pc.space.nearest(&r.minimum(v.label))));
        for &s in &v.states {
            assert!(!seen[s]);
            seen[s] = true;
        }
        assert!(a.states.iter().all(|s| v.states.contains(s)));
    }

    let r2 = landscape_report(2, 2.5).unwrap();
    let pc2 = chain(2, 2.5, 30, RateKind::Sqrt);
    let s2 = metastable_sets(&pc2, &r2, None, None).unwrap();
    assert_eq!(s2.labels(), vec![1, 2]);
    let mirror = |i: usize| {
        let c = pc2.space.state(i);
        pc2.space.index(&[c[1], c[0]]).unwrap()
    };
    let mut a: Vec<usize> = s2.valley(1).unwrap().iter().map(|&i| mirror(i)).collect();
    a.sort_unstable();
    let mut b = s2.valley(2).unwrap().to_vec();
    b.sort_unstable();
    assert_eq!(a, b);
}

#[test]
fn deep_ordered_valleys_exclude_zero() {
    let r = landscape_report(3, 3.5).unwrap();
    let pc = chain(3, 3.5, 20, RateKind::Sqrt);
    let sets = metastable_sets(&pc, &r, None, None).unwrap();
    assert!(sets.valley(0).is_none());
}

#[test]
fn communication_height_examples() {
    let pc = chain(2, 2.5, 20, RateKind::Sqrt);
    let f = pc.free_energies();
    let (h, _) = discrete_comm_height(&pc, &f, &[3], &[4]).unwrap();
    assert_eq!(h, f[3].max(f[4]));
    let (hab, _) = discrete_comm_height(&pc, &f, &[2], &[15]).unwrap();
    let (hba, _) = discrete_comm_height(&pc, &f, &[15], &[2]).unwrap();
    assert_eq!(hab, hba);

    let fe = free_energy(&[0.5, 0.5], 2.5);
    let mut gaps = Vec::new();
    for n in [20usize, 40, 80] {
        let r = landscape_report(2, 2.5).unwrap();
        let pc = chain(2, 2.5, n, RateKind::Sqrt);
        let f = pc.free_energies();
        let a = pc.space.nearest(&r.u1);
        let b = pc.space.nearest(&r.minimum(2));
        let (h, _) = discrete_comm_height(&pc, &f, &[a], &[b]).unwrap();
        let gap = (h - fe).abs();
        assert!(gap < 5.0 * 4.0 / (n * n) as f64 + 1.0 / n as f64);
        gaps.push(gap);
    }
    assert!(gaps.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn descending_path_examples() {
    let r = landscape_report(3, 3.5).unwrap();
    let pc = chain(3, 3.5, 30, RateKind::Sqrt);
    let sets = metastable_sets(&pc, &r, None, None).unwrap();
    let f = pc.free_energies();
    let targets = sets.union(&sets.labels());
    let start = pc.space.nearest(&r.e);
    let path = descending_path(&pc, &f, start, &targets, 0.01).unwrap();
    assert!(targets.contains(path.last().unwrap()));
    let top = path.iter().map(|&i| f[i]).fold(f64::MIN, f64::max);
    assert!(top <= r.f(&r.e) + 0.01);

    // Exhaustive sweep at q = 2.
    let r2 = landscape_report(2, 2.5).unwrap();
    let pc2 = chain(2, 2.5, 50, RateKind::Sqrt);
    let s2 = metastable_sets(&pc2, &r2, None, None).unwrap();
    let f2 = pc2.free_energies();
    let t2 = s2.union(&[1, 2]);
    for x in 0..pc2.len() {
        let p = descending_path(&pc2, &f2, x, &t2, 0.005).unwrap();
        let top = p.iter().map(|&i| f2[i]).fold(f64::MIN, f64::max);
        assert!(top <= f2[x] + 0.005);
        if t2.contains(&x) {
            assert_eq!(p, vec![x]);
        }
    }
}

fn path3() -> FiniteChain {
    FiniteChain::from_conductances(3, &[(0, 1, 1.0 / 3.0), (1, 2, 1.0 / 3.0)], &[1.0 / 3.0; 3]).unwrap()
}

#[test]
fn harmonic_and_capacity_examples() {
    let two = FiniteChain::from_conductances(2, &[(0, 1, 0.3)], &[0.5, 0.5]).unwrap();
    let eq = equilibrium_potential(&two, &[0], &[1]).unwrap();
    assert_eq!(eq.h, vec![1.0, 0.0]);
    assert_relative_eq!(eq.capacity, two.stationary[0] * two.rate(0, 1), epsilon = 1e-15);
    assert_relative_eq!(thomson_lower(&two, &[0, 1]).unwrap(), eq.capacity, epsilon = 1e-15);

    let p = path3();
    let eq = equilibrium_potential(&p, &[0], &[2]).unwrap();
    assert_relative_eq!(eq.h[1], 0.5, epsilon = 1e-14);
    let (lhs, rhs) = renewal_bound(&p, &eq.h, 1, &[0], &[2]).unwrap();
    assert!(lhs <= rhs && rhs >= 0.5);
    assert_relative_eq!(dirichlet_upper(&p, &eq.h, &[0], &[2]).unwrap(), eq.capacity, max_relative = 1e-10);
    assert_relative_eq!(capacity(&p, &[0], &[2]).unwrap(), capacity(&p, &[2], &[0]).unwrap(), max_relative = 1e-12);
    // A detour through a longer path never increases the Thomson bound.
    assert!(thomson_lower(&p, &[0, 1, 0, 1, 2]).unwrap() <= thomson_lower(&p, &[0, 1, 2]).unwrap());
}

#[test]
fn cwp_capacity_sandwich() {
    let r = landscape_report(2, 2.5).unwrap();
    let pc = chain(2, 2.5, 12, RateKind::Sqrt);
    let sets = metastable_sets(&pc, &r, Some(r.depth / 4.0), None).unwrap();
    let (a, b) = (sets.union(&[1]), sets.union(&[2]));
    let cap = capacity(&pc.chain, &a, &b).unwrap();
    assert_relative_eq!(cap, capacity(&pc.chain, &b, &a).unwrap(), max_relative = 1e-12);
    let f = pc.free_energies();
    let (_, path) = discrete_comm_height(&pc, &f, &a, &b).unwrap();
    let lower = thomson_lower(&pc.chain, &path).unwrap();
    let upper = dirichlet_upper(&pc.chain, &distance_interpolation(&pc.chain, &a, &b), &a, &b).unwrap();
    assert!(lower > 0.0 && lower <= cap && cap <= upper);
    // The sublevel indicator 1 - 1_{W} with W the component of A below H gives a finite bound.
    let w = cwp_core::exact::metastable::sublevel_component(&pc, &f, r.saddle_height, a[0]);
    let ind: Vec<f64> = (0..pc.len()).map(|x| if w.contains(&x) { 1.0 } else { 0.0 }).collect();
    let ub = dirichlet_upper(&pc.chain, &ind, &a, &b).unwrap();
    assert!(ub.is_finite() && ub >= cap);
}

#[test]
fn renewal_bound_on_two_spin_valleys() {
    let r = landscape_report(2, 2.5).unwrap();
    let pc = chain(2, 2.5, 10, RateKind::Sqrt);
    let sets = metastable_sets(&pc, &r, Some(r.depth / 4.0), None).unwrap();
    let (a, b) = (sets.union(&[1]), sets.union(&[2]));
    let eq = equilibrium_potential(&pc.chain, &a, &b).unwrap();
    for x in 0..pc.len() {
        if a.contains(&x) || b.contains(&x) {
            continue;
        }
        let (lhs, rhs) = renewal_bound(&pc.chain, &eq.h, x, &a, &b).unwrap();
        assert!(lhs <= rhs * (1.0 + 1e-10), "x={x}: {lhs} > {rhs}");
    }
}

#[test]
fn hitting_time_examples() {
    // Single state outside B: mean hitting time is the holding time.
    let p = path3();
    let t = mean_hitting_time(&p, &[0, 2]).unwrap();
    assert_relative_eq!(t.values[1], 1.0 / p.exit_rate(1), max_relative = 1e-12);

    let pc = chain(3, 3.2, 10, RateKind::Sqrt);
    let b = vec![0usize, 5];
    let direct = mean_hitting_time(&pc.chain, &b).unwrap();
    let mut bigger = b.clone();
    bigger.extend([20, 40]);
    let larger = mean_hitting_time(&pc.chain, &bigger).unwrap();
    for x in 0..pc.len() {
        if b.contains(&x) {
            continue;
        }
        let mf = magic_formula_hitting(&pc.chain, x, &b).unwrap();
        assert!((mf - direct.values[x]).abs() / direct.values[x] < 1e-8);
        assert!(larger.values[x] <= direct.values[x] * (1.0 + 1e-12));
    }
}

#[test]
fn escape_probability_examples() {
    let r = landscape_report(2, 2.5).unwrap();
    let pc = chain(2, 2.5, 10, RateKind::Sqrt);
    let sets = metastable_sets(&pc, &r, Some(r.depth / 4.0), None).unwrap();
    let b = sets.union(&[2]);
    let times = [1e-6, 0.01, 0.1, 1.0, 10.0, 100.0];
    for &x in sets.valley(1).unwrap() {
        let surv = survival_probability(&pc.chain, x, &b, &times).unwrap();
        for (t, s) in times.iter().zip(&surv) {
            assert!(1.0 - s <= escape_probability_bound(&pc.chain, x, &b, *t).unwrap());
        }
        assert!(1.0 - surv[0] < 1e-6);
        let b1 = escape_probability_bound(&pc.chain, x, &b, 1.0).unwrap();
        let b4 = escape_probability_bound(&pc.chain, x, &b, 4.0).unwrap();
        assert_relative_eq!(b4 / b1, 2.0, max_relative = 1e-12);
    }
}

fn base_spec(q: usize, beta: f64, n: usize, replicas: usize, seed: u64) -> SimSpec {
    SimSpec {
        params: ModelParams::new(q, beta, n, RateKind::Sqrt).unwrap(),
        mode: SimMode::Proportions,
        replicas,
        seed,
        t_max: 50.0,
        record: Record::Trajectory,
        exec: Exec::Parallel,
    }
}

#[test]
fn same_seed_same_events() {
    for mode in [SimMode::Proportions, SimMode::FullConfig] {
        let spec = SimSpec { mode, ..base_spec(3, 3.2, 12, 8, 7) };
        let a = simulate_trajectories(&spec, &[4, 4, 4]).unwrap();
        let b = simulate_trajectories(&spec, &[4, 4, 4]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.times, y.times);
            assert_eq!(x.states, y.states);
        }
    }
}

#[test]
fn full_and_proportions_valley_occupation_agree_with_exact_law() {
    let (q, beta, n) = (3, 3.2, 20);
    let replicas = 10_000;
    let r = landscape_report(q, beta).unwrap();
    let pc = chain(q, beta, n, RateKind::Sqrt);
    let sets = metastable_sets(&pc, &r, Some(r.depth / 4.0), None).unwrap();
    let vmap = sets.valley_map(pc.len());
    let start_idx = pc.space.nearest(&r.u1);
    let start = pc.space.state(start_idx).clone();
    let t = 200.0;
    let sp = Spectrum::new(&pc.chain, DEFAULT_MAX_DENSE).unwrap();
    let law = sp.distribution_from(start_idx, t);
    let mut exact = [0.0; 4];
    for (i, p) in law.iter().enumerate() {
        exact[vmap[i].unwrap_or(0)] += p;
    }
    for (mode, seed) in [(SimMode::Proportions, 11), (SimMode::FullConfig, 12)] {
        let spec = SimSpec { mode, t_max: 2.0 * t, ..base_spec(q, beta, n, replicas, seed) };
        let states = simulate_states_at(&spec, &start, &[t]).unwrap();
        let mut counts = [0usize; 4];
        for s in &states {
            counts[vmap[pc.space.index(&s[0]).unwrap()].unwrap_or(0)] += 1;
        }
        for k in 0..4 {
            let p = exact[k];
            let se = (p * (1.0 - p) / replicas as f64).sqrt();
            let ph = counts[k] as f64 / replicas as f64;
            assert!((ph - p).abs() <= 3.0 * se, "{mode:?} slot {k}: {ph} vs {p} (se {se})");
        }
    }
}

#[test]
fn long_run_occupation_matches_stationary_law() {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let pc = chain(2, 2.5, 10, RateKind::Sqrt);
    let spec = SimSpec { t_max: 2000.0, record: Record::Occupation, ..base_spec(2, 2.5, 10, 50, 3) };
    let recs = simulate(&spec, &[5, 5]).unwrap();
    // Time fractions from independent replicas, binned per replica to get
    // approximately independent multinomial-like counts.
    let mut occ = vec![0.0; pc.len()];
    for rec in &recs {
        let ReplicaRecord::Occupation(v) = rec else { panic!("expected occupation") };
        let tot: f64 = v.iter().map(|(_, t)| t).sum();
        for (s, t) in v {
            occ[pc.space.index(s).unwrap()] += t / tot;
        }
    }
    let m = recs.len() as f64;
    let chi2: f64 = (0..pc.len())
        .map(|i| {
            let e = m * pc.chain.stationary[i];
            (occ[i] - e).powi(2) / e
        })
        .sum();
    let crit = ChiSquared::new((pc.len() - 1) as f64).unwrap().inverse_cdf(0.99);
    assert!(chi2 < crit, "chi2 {chi2} >= {crit}");
}

#[test]
fn hitting_estimate_examples() {
    let pc = chain(3, 3.2, 12, RateKind::Sqrt);
    let start = vec![4u32, 4, 4];
    let si = pc.space.index(&start).unwrap();
    // Target = everything except the start: one holding time.
    let spec = SimSpec { record: Record::HittingOnly, ..base_spec(3, 3.2, 12, 20_000, 5) };
    let est = estimate_hitting(&spec, &start, |s: &[u32]| s != [4, 4, 4]).unwrap();
    let hold = 1.0 / pc.chain.exit_rate(si);
    assert!((est.mean - hold).abs() <= 3.0 * est.std_error);

    let small = estimate_hitting(&SimSpec { replicas: 4000, ..spec }, &start, |s: &[u32]| s[0] >= 8).unwrap();
    let large = estimate_hitting(&SimSpec { replicas: 8000, seed: 6, ..spec }, &start, |s: &[u32]| s[0] >= 8).unwrap();
    let ratio = small.std_error / large.std_error;
    assert!((1.2..1.7).contains(&ratio), "s.e. ratio {ratio}");
}

#[test]
fn order_process_examples() {
    let r = landscape_report(2, 2.5).unwrap();
    let pc = chain(2, 2.5, 10, RateKind::Sqrt);
    let sets = metastable_sets(&pc, &r, Some(r.depth / 4.0), None).unwrap();
    let vmap = sets.valley_map(pc.len());
    let labels = sets.labels();
    let theta = metastable_timescale(10, 2.5, r.depth);
    let classify = |s: &[u32]| vmap[pc.space.index(s).unwrap()].and_then(|v| labels.iter().position(|&l| l == v));
    let spec = SimSpec { t_max: 20.0 * theta, record: Record::HittingOnly, ..base_spec(2, 2.5, 10, 200, 9) };
    let st = order_process_stats(&spec, &[5, 5], &labels, classify, theta).unwrap();
    let (a, b) = (st.transitions[0][1] as f64, st.transitions[1][0] as f64);
    assert!((a - b).abs() <= 3.0 * (a + b).sqrt() + 1.0);

    let t3 = critical_temperatures(3).unwrap();
    let beta = 0.5 * (t3.beta1 + t3.beta2.unwrap());
    let r3 = landscape_report(3, beta).unwrap();
    let mut fractions = Vec::new();
    // The landscape is very flat here; valleys exist on the grid from N of about 60.
    for n in [60usize, 100] {
        let pc = chain(3, beta, n, RateKind::Sqrt);
        let sets = metastable_sets(&pc, &r3, Some(r3.depth / 4.0), None).unwrap();
        let vmap = sets.valley_map(pc.len());
        let labels = sets.labels();
        let theta = metastable_timescale(n, beta, r3.depth);
        let classify = |s: &[u32]| vmap[pc.space.index(s).unwrap()].and_then(|v| labels.iter().position(|&l| l == v));
        let start = pc.space.state(pc.space.nearest(&r3.u1)).clone();
        let spec = SimSpec { t_max: 20.0 * theta, record: Record::HittingOnly, ..base_spec(3, beta, n, 100, 10) };
        let st = order_process_stats(&spec, &start, &labels, classify, theta).unwrap();
        let zero = labels.iter().position(|&l| l == 0).unwrap();
        // Moves out of the u-valleys land in valley 0.
        let from_u: Vec<usize> = (0..labels.len()).filter(|&a| a != zero).collect();
        let into_zero: u64 = from_u.iter().map(|&a| st.transitions[a][zero]).sum();
        let total: u64 = from_u.iter().map(|&a| st.transitions[a].iter().sum::<u64>()).sum();
        assert!(total > 0 && into_zero as f64 >= 0.9 * total as f64, "{into_zero} of {total}");
        fractions.push(st.outside_fraction);
    }
    assert!(fractions[1] < fractions[0], "outside fractions {fractions:?}");
}
