//! Finite-difference audit of every differentiable layer in the crate.
//!
//! Each case draws a random input and random parameters, evaluates a
//! direct-loop oracle that also reports how close every max/min decision
//! came to a tie, and redraws until all decisions are separated by more
//! than [`SuiteConfig::margin`]. The analytic gradient of a random linear
//! probe of the output is then compared with central differences for the
//! input and for each parameter tensor.

use serde::{Deserialize, Serialize};

use crate::activations::diff as act;
use crate::autodiff::{finite_difference_grad, GradCheckReport, Graph, Var};
use crate::error::{Error, Result};
use crate::morphops::{diff as morph, PoolSpec, StructuringFunction};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Draws per case; even draws pool 2×2 with stride 2, odd draws 3×3
    /// with stride 1 (overlapping windows).
    pub trials: usize,
    pub step: f64,
    pub margin: f64,
    pub tolerance: f64,
    /// Largest `N` and `M` exercised for the max-min layers.
    pub max_terms: usize,
    /// Corrupt the analytic gradient of every case whose name starts with
    /// this prefix; used to check that the suite can fail.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 2,
            step: 1e-5,
            margin: 1e-3,
            tolerance: 1e-4,
            max_terms: 4,
            fault: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub tolerance: f64,
    pub checks: Vec<GradCheckReport>,
}

impl SuiteReport {
    pub fn max_rel_error(&self) -> f64 {
        self.checks.iter().map(|c| c.max_rel_error).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> Vec<&GradCheckReport> {
        self.checks.iter().filter(|c| !c.passes(self.tolerance)).collect()
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Layer {
    Prelu2,
    SelfDual,
    PosNeg,
    ActPool,
    Dilate,
    Erode,
    Pl { m: usize, n: usize },
    Act1 { m: usize, n: usize },
    Act2 { m: usize, n: usize },
}

const BATCH: usize = 2;
const CHANNELS: usize = 2;
const SIDE: usize = 4;

impl Layer {
    fn name(&self) -> String {
        match *self {
            Self::Prelu2 => "prelu2".into(),
            Self::SelfDual => "selfdual_pool".into(),
            Self::PosNeg => "posneg_pool_param".into(),
            Self::ActPool => "act_pool".into(),
            Self::Dilate => "dilate".into(),
            Self::Erode => "erode".into(),
            Self::Pl { m, n } => format!("pl_activation[n={n},m={m}]"),
            Self::Act1 { m, n } => format!("morpho_act1[n={n},m={m}]"),
            Self::Act2 { m, n } => format!("morpho_act2[n={n},m={m}]"),
        }
    }

    fn param_names(&self) -> &'static [&'static str] {
        match self {
            Self::Prelu2 | Self::PosNeg => &["beta_pos", "beta_neg"],
            Self::SelfDual => &[],
            Self::ActPool => &["alpha"],
            Self::Dilate | Self::Erode => &["weights"],
            Self::Pl { .. } => &["beta", "alpha"],
            Self::Act1 { .. } | Self::Act2 { .. } => &["beta", "alpha", "weights"],
        }
    }

    fn sample_params(&self, rng: &mut Rng, pool: &PoolSpec) -> Vec<Tensor<f64>> {
        let c = CHANNELS;
        let r = pool.window_len();
        match *self {
            Self::Prelu2 => {
                let neg: Tensor<f64> = rng.uniform_tensor(&[c], -1.0, 1.0);
                let gap: Tensor<f64> = rng.uniform_tensor(&[c], 0.2, 1.0);
                vec![neg.zip_map(&gap, |a, b| a + b).expect("same shape"), neg]
            }
            Self::PosNeg => vec![rng.uniform_tensor(&[c], -1.5, 1.5), rng.uniform_tensor(&[c], -1.5, 1.5)],
            Self::SelfDual => vec![],
            Self::ActPool => vec![rng.uniform_tensor(&[c], -1.0, 1.0)],
            Self::Dilate | Self::Erode => vec![rng.uniform_tensor(&[9], -0.5, 0.5)],
            Self::Pl { m, n } => vec![rng.uniform_tensor(&[c, m, n], -1.5, 1.5), rng.uniform_tensor(&[c, m, n], -1.0, 1.0)],
            Self::Act1 { m, n } | Self::Act2 { m, n } => {
                let banks = if matches!(self, Self::Act1 { .. }) { m } else { n };
                vec![
                    rng.uniform_tensor(&[c, m, n], -1.5, 1.5),
                    rng.uniform_tensor(&[c, m, n], -1.0, 1.0),
                    rng.uniform_tensor(&[c, banks, r], -0.5, 0.5),
                ]
            }
        }
    }

    fn forward<'g>(&self, x: Var<'g, f64>, p: &[Var<'g, f64>], pool: &PoolSpec) -> Result<Var<'g, f64>> {
        match *self {
            Self::Prelu2 => morph::prelu2(x, p[0], p[1], 2),
            Self::SelfDual => morph::selfdual_pool(x, pool),
            Self::PosNeg => morph::posneg_pool_param(x, pool, p[0], p[1]),
            Self::ActPool => morph::act_pool(x, pool, p[0]),
            Self::Dilate => morph::dilate(x, &window3(), p[0]),
            Self::Erode => morph::erode(x, &window3(), p[0]),
            Self::Pl { .. } => act::pl_activation(x, p[0], p[1], 2),
            Self::Act1 { .. } => act::morpho_act1(x, p[0], p[1], p[2], pool),
            Self::Act2 { .. } => act::morpho_act2(x, p[0], p[1], p[2], pool),
        }
    }
}

fn window3() -> StructuringFunction<f64> {
    StructuringFunction::flat((-1..=1).flat_map(|a| (-1..=1).map(move |b| vec![a, b])).collect()).expect("3x3 window")
}

fn cases(max_terms: usize) -> Vec<Layer> {
    let mut out = vec![
        Layer::Prelu2,
        Layer::SelfDual,
        Layer::PosNeg,
        Layer::ActPool,
        Layer::Dilate,
        Layer::Erode,
    ];
    for m in 1..=max_terms {
        for n in 1..=max_terms {
            out.extend([Layer::Pl { m, n }, Layer::Act1 { m, n }, Layer::Act2 { m, n }]);
        }
    }
    out
}

/// Run every case and collect one report per (case, draw, tensor).
pub fn run(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let mut rng = Rng::new(cfg.seed);
    let mut checks = Vec::new();
    for layer in cases(cfg.max_terms) {
        for trial in 0..cfg.trials {
            let pool = if trial % 2 == 0 { PoolSpec::square(2, 2)? } else { PoolSpec::square(3, 1)? };
            checks.extend(check_case(layer, &pool, trial, cfg, &mut rng)?);
        }
    }
    Ok(SuiteReport {
        tolerance: cfg.tolerance,
        checks,
    })
}

fn check_case(layer: Layer, pool: &PoolSpec, trial: usize, cfg: &SuiteConfig, rng: &mut Rng) -> Result<Vec<GradCheckReport>> {
    let label = format!("{}#{trial}", layer.name());
    let mut attempt = 0;
    let (x, params, expected) = loop {
        let x: Tensor<f64> = rng.uniform_tensor(&[BATCH, CHANNELS, SIDE, SIDE], -2.0, 2.0);
        let params = layer.sample_params(rng, pool);
        let (expected, margin) = oracle(layer, &x, &params, pool);
        if margin > cfg.margin {
            break (x, params, expected);
        }
        attempt += 1;
        if attempt == 500 {
            return Err(Error::InvalidParameter(format!("{label}: no tie-free sample in 500 draws")));
        }
    };

    let mut tensors = vec![x];
    tensors.extend(params);
    let probe: Tensor<f64> = {
        let g = Graph::new();
        let vars: Vec<Var<'_, f64>> = tensors.iter().map(|t| g.constant(t.clone())).collect();
        let out = layer.forward(vars[0], &vars[1..], pool)?;
        let shape = out.shape();
        rng.uniform_tensor(&shape, -1.0, 1.0)
    };

    let g = Graph::new();
    let vars: Vec<Var<'_, f64>> = tensors.iter().map(|t| g.leaf(t.clone())).collect();
    let out = layer.forward(vars[0], &vars[1..], pool)?;
    let mut reports = vec![GradCheckReport::compare(
        format!("{label}/forward"),
        &out.value(),
        &Tensor::new(out.shape(), expected)?,
    )];
    let root = out.dot_const(&probe)?;
    let grads = g.backward(root)?;

    let loss = |ts: &[Tensor<f64>]| -> f64 {
        let g = Graph::new();
        let vars: Vec<Var<'_, f64>> = ts.iter().map(|t| g.constant(t.clone())).collect();
        let out = layer.forward(vars[0], &vars[1..], pool).expect("forward succeeded before");
        out.dot_const(&probe).expect("probe shape").value().item()
    };
    let names: Vec<&str> = std::iter::once("input").chain(layer.param_names().iter().copied()).collect();
    let faulty = cfg.fault.as_deref().is_some_and(|f| layer.name().starts_with(f));
    for (k, name) in names.iter().enumerate() {
        let mut analytic = grads.get_or_zeros(vars[k], &tensors[k]);
        if faulty && k == names.len() - 1 {
            analytic.data_mut().iter_mut().for_each(|v| *v = *v * 1.01 + 1e-3);
        }
        let numeric = finite_difference_grad(
            |t| {
                let mut ts = tensors.clone();
                ts[k] = t.clone();
                loss(&ts)
            },
            &tensors[k],
            cfg.step,
        );
        reports.push(GradCheckReport::compare(format!("{label}/{name}"), &analytic, &numeric));
    }
    Ok(reports)
}

/// A value together with whether it still depends on the inputs; values
/// clipped to a constant by a ReLU may tie without creating a kink.
#[derive(Clone, Copy, Debug)]
struct Tr {
    v: f64,
    live: bool,
}

fn live(v: f64) -> Tr {
    Tr { v, live: true }
}

struct Margin(f64);

impl Margin {
    fn note(&mut self, gap: f64) {
        self.0 = self.0.min(gap);
    }

    fn relu(&mut self, x: Tr) -> Tr {
        if x.live {
            self.note(x.v.abs());
        }
        if x.v > 0.0 {
            x
        } else {
            Tr { v: 0.0, live: false }
        }
    }

    fn pick(&mut self, cands: &[Tr], maximize: bool) -> Tr {
        let mut bi = 0;
        for (k, c) in cands.iter().enumerate() {
            if (maximize && c.v > cands[bi].v) || (!maximize && c.v < cands[bi].v) {
                bi = k;
            }
        }
        let best = cands[bi];
        for (k, c) in cands.iter().enumerate() {
            if k != bi && (c.live || best.live) {
                self.note((best.v - c.v).abs());
            }
        }
        best
    }
}

/// Direct-loop evaluation over `[BATCH, CHANNELS, SIDE, SIDE]` inputs,
/// returning the flattened output and the smallest decision gap.
fn oracle(layer: Layer, x: &Tensor<f64>, params: &[Tensor<f64>], pool: &PoolSpec) -> (Vec<f64>, f64) {
    let mut mg = Margin(f64::INFINITY);
    let planes = BATCH * CHANNELS;
    let at = |p: usize, r: usize, c: usize| x.data()[(p * SIDE + r) * SIDE + c];
    let (rr, kk) = (pool.window()[0], pool.stride()[0]);
    let on = (SIDE - rr) / kk + 1;
    let win = |p: usize, oy: usize, ox: usize| -> Vec<(usize, usize, f64)> {
        let mut v = Vec::new();
        for a in 0..rr {
            for b in 0..rr {
                v.push((a * rr + b, 0, at(p, oy * kk + a, ox * kk + b)));
            }
        }
        v
    };
    let prm = |t: usize, idx: &[usize]| -> f64 {
        let s = params[t].shape();
        let flat = idx.iter().zip(s).fold(0, |acc, (&i, &d)| acc * d + i);
        params[t].data()[flat]
    };
    let mut out = Vec::new();
    for p in 0..planes {
        let ch = p % CHANNELS;
        match layer {
            Layer::Prelu2 => {
                for r in 0..SIDE {
                    for c in 0..SIDE {
                        let v = at(p, r, c);
                        out.push(mg.pick(&[live(prm(1, &[ch]) * v), live(prm(0, &[ch]) * v)], true).v);
                    }
                }
            }
            Layer::Pl { m, n } => {
                for r in 0..SIDE {
                    for c in 0..SIDE {
                        let v = at(p, r, c);
                        let rows: Vec<Tr> = (0..m)
                            .map(|j| {
                                let pieces: Vec<Tr> = (0..n).map(|i| live(prm(0, &[ch, j, i]) * v + prm(1, &[ch, j, i]))).collect();
                                mg.pick(&pieces, true)
                            })
                            .collect();
                        out.push(mg.pick(&rows, false).v);
                    }
                }
            }
            Layer::Dilate | Layer::Erode => {
                let erode = layer == Layer::Erode;
                for r in 0..SIDE as i64 {
                    for c in 0..SIDE as i64 {
                        let mut cands = Vec::new();
                        for (k, (dy, dx)) in (-1..=1).flat_map(|a| (-1..=1).map(move |b| (a, b))).enumerate() {
                            let (sy, sx) = if erode { (r + dy, c + dx) } else { (r - dy, c - dx) };
                            if (0..SIDE as i64).contains(&sy) && (0..SIDE as i64).contains(&sx) {
                                let f = at(p, sy as usize, sx as usize);
                                let w = params[0].data()[k];
                                cands.push(live(if erode { f - w } else { f + w }));
                            }
                        }
                        out.push(mg.pick(&cands, !erode).v);
                    }
                }
            }
            _ => {
                for oy in 0..on {
                    for ox in 0..on {
                        let w = win(p, oy, ox);
                        let v = match layer {
                            Layer::SelfDual => {
                                let pos: Vec<Tr> = w.iter().map(|&(_, _, v)| mg.relu(live(v))).collect();
                                let neg: Vec<Tr> = w.iter().map(|&(_, _, v)| mg.relu(live(-v))).collect();
                                mg.pick(&pos, true).v - mg.pick(&neg, true).v
                            }
                            Layer::PosNeg => {
                                let (bp, bn) = (prm(0, &[ch]), prm(1, &[ch]));
                                let up: Vec<Tr> = w.iter().map(|&(_, _, v)| mg.relu(live(bn * v))).collect();
                                let lo: Vec<Tr> = w
                                    .iter()
                                    .map(|&(_, _, v)| {
                                        let s = bp * v;
                                        mg.note(s.abs());
                                        if s < 0.0 {
                                            live(s)
                                        } else {
                                            Tr { v: 0.0, live: false }
                                        }
                                    })
                                    .collect();
                                mg.pick(&up, true).v + mg.pick(&lo, false).v
                            }
                            Layer::ActPool => {
                                let a = prm(0, &[ch]);
                                let c: Vec<Tr> = w.iter().map(|&(_, _, v)| mg.relu(live(v + a))).collect();
                                mg.pick(&c, true).v
                            }
                            Layer::Act1 { m, n } => {
                                let rows: Vec<Tr> = (0..m)
                                    .map(|j| {
                                        let cands: Vec<Tr> = w
                                            .iter()
                                            .map(|&(u, _, v)| {
                                                let pieces: Vec<Tr> =
                                                    (0..n).map(|i| live(prm(0, &[ch, j, i]) * v + prm(1, &[ch, j, i]))).collect();
                                                live(mg.pick(&pieces, true).v + prm(2, &[ch, j, u]))
                                            })
                                            .collect();
                                        mg.pick(&cands, true)
                                    })
                                    .collect();
                                mg.pick(&rows, false).v
                            }
                            Layer::Act2 { m, n } => {
                                let cols: Vec<Tr> = (0..n)
                                    .map(|i| {
                                        let cands: Vec<Tr> = w.iter().map(|&(u, _, v)| live(v + prm(2, &[ch, i, u]))).collect();
                                        let pooled = mg.pick(&cands, true).v;
                                        let pieces: Vec<Tr> =
                                            (0..m).map(|j| live(prm(0, &[ch, j, i]) * pooled + prm(1, &[ch, j, i]))).collect();
                                        mg.pick(&pieces, true)
                                    })
                                    .collect();
                                mg.pick(&cols, false).v
                            }
                            _ => unreachable!("pointwise layers handled above"),
                        };
                        out.push(v);
                    }
                }
            }
        }
    }
    (out, mg.0)
}
