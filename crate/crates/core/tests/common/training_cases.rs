//! Random networks and finite-difference oracles for the derivative, CG and
//! line-search checks.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rkhs_conv::nonlinearity::{apply_eta, eta_frechet};
use rkhs_conv::training::{
    apply_direction, cg_solve_direction, frechet_f1, frechet_f2, frechet_full, loss, loss_frechet, pad_with,
    total_loss, wolfe_backtrack, CgStatus, Direction, Pair, TrainConfig,
};
use rkhs_conv::{AlgNet, Center, DomainOp, Kernel, RkhsSignal, Term, Tolerances};

pub const FD_STEP: f64 = 1e-6;
pub const FD_TOL: f64 = 1e-4;

fn kernel() -> Arc<Kernel> {
    Arc::new(Kernel::gaussian1d(0.5).unwrap())
}

pub fn line(pairs: &[(f64, f64)]) -> RkhsSignal {
    RkhsSignal::new(
        kernel(),
        DomainOp::Translation1d,
        pairs.iter().map(|&(c, w)| Term::new(Center::Scalar(c), w)).collect(),
    )
    .unwrap()
}

pub fn random_line(rng: &mut ChaCha8Rng, n: usize, lo: f64) -> RkhsSignal {
    let pairs: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(lo..1.0)))
        .collect();
    line(&pairs)
}

pub fn random_net(rng: &mut ChaCha8Rng, n1: usize, n2: usize) -> AlgNet {
    let layer1 = (0..n1).map(|_| random_line(rng, 2, 0.2)).collect();
    let layer2 = (0..n2)
        .map(|_| (0..n1).map(|_| random_line(rng, 2, 0.2)).collect())
        .collect();
    AlgNet::new(layer1, layer2).unwrap()
}

pub fn random_direction(rng: &mut ChaCha8Rng, net: &AlgNet) -> Direction {
    Direction {
        layer1: (0..net.n1()).map(|_| random_line(rng, 2, -1.0)).collect(),
        layer2: (0..net.n2())
            .map(|_| (0..net.n1()).map(|_| random_line(rng, 2, -1.0)).collect())
            .collect(),
    }
}

/// Every pre-activation value at a center is at least `1e-3` from zero.
pub fn away_from_kinks(net: &AlgNet, f: &RkhsSignal) -> bool {
    let tr = net.forward_trace(f).unwrap();
    tr.a.iter()
        .chain(&tr.b)
        .all(|s| s.centers().iter().all(|c| s.evaluate(c).unwrap().abs() >= 1e-3))
}

fn diff(a: &RkhsSignal, b: &RkhsSignal) -> RkhsSignal {
    a.add_with(&b.scale_with(-1.0, Tolerances::STRUCTURAL), Tolerances::STRUCTURAL)
        .unwrap()
}

fn rel_err(fd: &RkhsSignal, an: &RkhsSignal) -> f64 {
    diff(fd, an).norm() / (1.0 + fd.norm())
}

fn central(plus: RkhsSignal, minus: RkhsSignal) -> RkhsSignal {
    diff(&plus, &minus).scale_with(0.5 / FD_STEP, Tolerances::STRUCTURAL)
}

fn fd_forward(net: &AlgNet, f: &RkhsSignal, d: &Direction) -> RkhsSignal {
    central(
        apply_direction(net, d, FD_STEP).unwrap().forward(f).unwrap(),
        apply_direction(net, d, -FD_STEP).unwrap().forward(f).unwrap(),
    )
}

/// A network already padded with the direction's centers, an input and a
/// target, all away from ReLU kinks.
pub struct Instance {
    pub net: AlgNet,
    pub input: RkhsSignal,
    pub target: RkhsSignal,
    pub d: Direction,
}

pub fn instances(seed: u64, count: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let net = random_net(&mut rng, 2, 2);
        let input = random_line(&mut rng, 2, 0.2);
        let d = random_direction(&mut rng, &net);
        let target = random_line(&mut rng, 3, -1.0);
        let net = pad_with(&net, &d).unwrap();
        if away_from_kinks(&net, &input) {
            out.push(Instance { net, input, target, d });
        }
    }
    out
}

/// Worst relative finite-difference error of each derivative, in the order
/// `eta_frechet, frechet_f1, frechet_f2, frechet_full, loss_frechet`.
pub fn derivative_errors(seed: u64, count: usize) -> [f64; 5] {
    let mut worst = [0.0f64; 5];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for inst in instances(seed, count) {
        let Instance { net, input: f, target: r, d } = &inst;

        // η alone, at a pre-activation of the network padded with its direction.
        let w = net.forward_trace(f).unwrap().a[0].clone();
        let dw = random_line(&mut rng, 2, -1.0);
        let w = w.pad_to(&dw.centers()).unwrap();
        if w.centers().iter().all(|c| w.evaluate(c).unwrap().abs() >= 1e-3) {
            let plus = apply_eta(&w.add_with(&dw.scale(FD_STEP), Tolerances::STRUCTURAL).unwrap()).unwrap();
            let minus = apply_eta(&w.add_with(&dw.scale(-FD_STEP), Tolerances::STRUCTURAL).unwrap()).unwrap();
            worst[0] = worst[0].max(rel_err(&central(plus, minus), &eta_frechet(&w, &dw).unwrap()));
        }

        for j in 0..net.n1() {
            let dj = Direction::layer1_only(net, j, &d.layer1[j]).unwrap();
            let an = frechet_f1(net, f, j, &d.layer1[j]).unwrap();
            worst[1] = worst[1].max(rel_err(&fd_forward(net, f, &dj), &an));
        }
        for i in 0..net.n2() {
            for j in 0..net.n1() {
                let dij = Direction::layer2_only(net, i, j, &d.layer2[i][j]).unwrap();
                let an = frechet_f2(net, f, i, j, &d.layer2[i][j]).unwrap();
                worst[2] = worst[2].max(rel_err(&fd_forward(net, f, &dij), &an));
            }
        }
        worst[3] = worst[3].max(rel_err(&fd_forward(net, f, d), &frechet_full(net, f, d).unwrap()));

        let up = loss(&apply_direction(net, d, FD_STEP).unwrap(), f, r).unwrap();
        let down = loss(&apply_direction(net, d, -FD_STEP).unwrap(), f, r).unwrap();
        let fd = (up - down) / (2.0 * FD_STEP);
        let an = loss_frechet(net, f, r, d).unwrap();
        worst[4] = worst[4].max((fd - an).abs() / (1.0 + fd.abs()));
    }
    worst
}

/// `N₁ = N₂ = 1` with filters `a·k₀`, `b·k₀` and input `k₀`: on the positive
/// branch the linearized map is a positive self-adjoint operator, so CG must
/// converge.
pub fn solvable(a: f64, b: f64, target: &[(f64, f64)]) -> (AlgNet, Vec<Pair>) {
    let net = AlgNet::new(vec![line(&[(0.0, a)])], vec![vec![line(&[(0.0, b)])]]).unwrap();
    (net, vec![Pair::new(line(&[(0.0, 1.0)]), line(target)).unwrap()])
}

pub fn solvable_instances() -> Vec<(AlgNet, Vec<Pair>)> {
    let targets: [&[(f64, f64)]; 3] = [
        &[(0.5, 1.0), (-0.8, 0.6), (1.1, -0.3)],
        &[(0.2, -1.0), (0.9, 0.4)],
        &[(-1.5, 0.7), (0.0, 0.2), (2.0, 1.0), (0.4, -0.5)],
    ];
    let mut out = Vec::new();
    for (a, b) in [(1.0, 1.0), (0.5, 2.0), (2.0, 0.3)] {
        for t in targets {
            out.push(solvable(a, b, t));
        }
    }
    out
}

/// Worst final CG residual and iteration count over the solvable instances.
pub fn cg_convergence() -> Result<(f64, usize), String> {
    let cfg = TrainConfig {
        cg_max_iter: 200,
        ..TrainConfig::default()
    };
    let mut worst = (0.0f64, 0usize);
    for (net, data) in solvable_instances() {
        let out = cg_solve_direction(&net, &data, &cfg).map_err(|e| e.to_string())?;
        if out.status != CgStatus::Converged || out.residual_norm > 1e-6 {
            return Err(format!("status {:?}, residual {:e}", out.status, out.residual_norm));
        }
        worst.0 = worst.0.max(out.residual_norm);
        worst.1 = worst.1.max(out.iterations);
    }
    Ok(worst)
}

/// Worst gap between the reported CG residual and one recomputed from the
/// returned direction, over random single-pair problems.
pub fn cg_self_consistency(seed: u64, count: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for k in 0..count {
        let net = AlgNet::new(
            vec![random_line(&mut rng, 1, 0.3)],
            vec![vec![random_line(&mut rng, 1, 0.3)]],
        )
        .unwrap();
        let p = Pair::new(random_line(&mut rng, 2, 0.2), random_line(&mut rng, 2, -1.0)).unwrap();
        let cfg = TrainConfig {
            cg_max_iter: 1 + k % 6,
            ..TrainConfig::default()
        };
        let out = cg_solve_direction(&net, std::slice::from_ref(&p), &cfg).unwrap();
        let res = diff(&p.target, &net.forward(&p.input).unwrap());
        let applied = frechet_full(&net, &p.input, &out.direction).unwrap();
        let again = diff(&res, &applied).norm();
        worst = worst.max((again - out.residual_norm).abs());
    }
    worst
}

/// Checks the sufficient-decrease inequality by recomputing both losses, and
/// that the accepted step never grows with `c`. Returns the number of
/// searches checked.
pub fn armijo_checks(seed: u64, count: usize) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    let cs = [1e-4, 0.1, 0.3, 0.5, 0.9, 0.999];
    // Solvable instances search along their CG direction, random networks
    // along a random one.
    let mut problems: Vec<(AlgNet, Vec<Pair>, Direction)> = Vec::new();
    for (net, data) in solvable_instances() {
        let cg = cg_solve_direction(&net, &data, &TrainConfig::default()).map_err(|e| e.to_string())?;
        problems.push((net, data, cg.direction));
    }
    while problems.len() < count {
        let net = random_net(&mut rng, 2, 2);
        let data = vec![Pair::new(random_line(&mut rng, 2, 0.2), random_line(&mut rng, 3, -1.0)).unwrap()];
        let d = random_direction(&mut rng, &net);
        problems.push((net, data, d));
    }
    for (net, data, d) in problems.into_iter().take(count) {
        let n = d.norm();
        if n == 0.0 {
            continue;
        }
        let mut d = d.scale(1.0 / n);
        let base = TrainConfig::default();
        // Monotonicity in c only holds along descent directions.
        let slope = wolfe_backtrack(&net, &data, &d, &base).map_err(|e| e.to_string())?.slope;
        if slope.abs() < 1e-10 {
            continue;
        }
        if slope < 0.0 {
            d = d.scale(-1.0);
        }
        let mut last = f64::INFINITY;
        for c in cs {
            let cfg = TrainConfig {
                wolfe_c: c,
                ..TrainConfig::default()
            };
            let ls = wolfe_backtrack(&net, &data, &d, &cfg).map_err(|e| e.to_string())?;
            let padded = pad_with(&net, &d).unwrap();
            let base_loss = total_loss(&padded, &data).unwrap();
            let trial = total_loss(&apply_direction(&padded, &d, ls.alpha).unwrap(), &data).unwrap();
            if ls.base_loss != base_loss || ls.loss != trial {
                return Err(format!("reported losses {} / {} differ from {base_loss} / {trial}", ls.base_loss, ls.loss));
            }
            if ls.alpha > 0.0 && !(trial <= base_loss - c * ls.alpha * ls.slope) {
                return Err(format!("Armijo violated: {trial} > {base_loss} - {c}·{}·{}", ls.alpha, ls.slope));
            }
            if ls.alpha > last {
                return Err(format!("alpha grew from {last} to {} at c = {c}", ls.alpha));
            }
            last = ls.alpha;
        }
        checked += 1;
    }
    Ok(checked)
}
