use std::io::{BufRead, Write};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::features::FeatureSpec;
use super::ActionSet;
use crate::error::{Error, Result};
use crate::rng::rng_from;

pub const HIDDEN: usize = 64;

/// One tanh hidden layer feeding an action-logit head and a value head.
/// Parameters are stored flat: `w1 (H x F)`, `b1 (H)`, `wp (A x H)`,
/// `bp (A)`, `wv (H)`, `bv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyModel {
    pub spec: FeatureSpec,
    pub action_set: ActionSet,
    pub inputs: usize,
    pub hidden: usize,
    pub actions: usize,
    pub params: Vec<f64>,
}

/// Intermediate values of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOutput {
    pub hidden: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub value: f64,
}

impl PolicyOutput {
    pub fn log_prob(&self, a: usize) -> f64 {
        self.probs[a].max(1e-300).ln()
    }

    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>()
    }
}

impl PolicyModel {
    pub fn param_count(inputs: usize, hidden: usize, actions: usize) -> usize {
        hidden * inputs + hidden + actions * hidden + actions + hidden + 1
    }

    pub fn zeros(spec: FeatureSpec, action_set: ActionSet) -> Self {
        let (inputs, hidden, actions) = (spec.dim(), HIDDEN, action_set.len());
        Self {
            spec,
            action_set,
            inputs,
            hidden,
            actions,
            params: vec![0.0; Self::param_count(inputs, hidden, actions)],
        }
    }

    /// Scaled normal hidden weights; small policy head so the initial
    /// policy is close to uniform.
    pub fn init(spec: FeatureSpec, action_set: ActionSet, seed: u64) -> Self {
        let mut m = Self::zeros(spec, action_set);
        let mut rng = rng_from(&[seed, 0x901C]);
        let (f, h, a) = (m.inputs, m.hidden, m.actions);
        let n1 = Normal::new(0.0, 1.0 / (f as f64).sqrt()).expect("valid sigma");
        let n2 = Normal::new(0.0, 0.01 / (h as f64).sqrt()).expect("valid sigma");
        let nv = Normal::new(0.0, 1.0 / (h as f64).sqrt()).expect("valid sigma");
        let (o_b1, o_wp, o_bp, o_wv, _) = m.offsets();
        for w in &mut m.params[..o_b1] {
            *w = n1.sample(&mut rng);
        }
        for w in &mut m.params[o_wp..o_bp] {
            *w = n2.sample(&mut rng);
        }
        for w in &mut m.params[o_wv..o_wv + h] {
            *w = nv.sample(&mut rng);
        }
        debug_assert_eq!(o_bp - o_wp, a * h);
        m
    }

    fn offsets(&self) -> (usize, usize, usize, usize, usize) {
        let b1 = self.hidden * self.inputs;
        let wp = b1 + self.hidden;
        let bp = wp + self.actions * self.hidden;
        let wv = bp + self.actions;
        let bv = wv + self.hidden;
        (b1, wp, bp, wv, bv)
    }

    pub fn forward(&self, x: &[f64]) -> Result<PolicyOutput> {
        if x.len() != self.inputs {
            return Err(Error::Config(format!(
                "policy expects {} features, got {}",
                self.inputs,
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("policy features"));
        }
        Ok(self.forward_with(&self.params, x))
    }

    pub fn forward_with(&self, params: &[f64], x: &[f64]) -> PolicyOutput {
        let (o_b1, o_wp, o_bp, o_wv, o_bv) = self.offsets();
        let f = self.inputs;
        let hidden: Vec<f64> = (0..self.hidden)
            .map(|j| {
                let row = &params[j * f..(j + 1) * f];
                (params[o_b1 + j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()).tanh()
            })
            .collect();
        let logits: Vec<f64> = (0..self.actions)
            .map(|a| {
                let row = &params[o_wp + a * self.hidden..o_wp + (a + 1) * self.hidden];
                params[o_bp + a] + row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>()
            })
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let sum: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= sum);
        let value = params[o_bv]
            + params[o_wv..o_wv + self.hidden]
                .iter()
                .zip(&hidden)
                .map(|(w, h)| w * h)
                .sum::<f64>();
        PolicyOutput {
            hidden,
            logits,
            probs,
            value,
        }
    }

    /// Accumulates into `grad` the gradient of a loss whose derivatives
    /// with respect to the logits and the value are given.
    pub fn backward(
        &self,
        params: &[f64],
        x: &[f64],
        out: &PolicyOutput,
        d_logits: &[f64],
        d_value: f64,
        grad: &mut [f64],
    ) {
        let (o_b1, o_wp, o_bp, o_wv, o_bv) = self.offsets();
        let (f, h) = (self.inputs, self.hidden);
        let mut d_hidden = vec![0.0; h];
        for a in 0..self.actions {
            let g = d_logits[a];
            if g == 0.0 {
                continue;
            }
            grad[o_bp + a] += g;
            for j in 0..h {
                grad[o_wp + a * h + j] += g * out.hidden[j];
                d_hidden[j] += g * params[o_wp + a * h + j];
            }
        }
        grad[o_bv] += d_value;
        for j in 0..h {
            grad[o_wv + j] += d_value * out.hidden[j];
            d_hidden[j] += d_value * params[o_wv + j];
        }
        for j in 0..h {
            let d_pre = d_hidden[j] * (1.0 - out.hidden[j] * out.hidden[j]);
            if d_pre == 0.0 {
                continue;
            }
            grad[o_b1 + j] += d_pre;
            for (g, v) in grad[j * f..(j + 1) * f].iter_mut().zip(x) {
                *g += d_pre * v;
            }
        }
    }
}

/// Derivative of `log p[a]` with respect to the logits.
pub fn d_log_prob(probs: &[f64], a: usize) -> Vec<f64> {
    probs
        .iter()
        .enumerate()
        .map(|(k, &p)| if k == a { 1.0 - p } else { -p })
        .collect()
}

/// Derivative of the entropy with respect to the logits.
pub fn d_entropy(probs: &[f64]) -> Vec<f64> {
    let h = -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>();
    probs
        .iter()
        .map(|&p| if p > 0.0 { -p * (p.ln() + h) } else { 0.0 })
        .collect()
}

/// Adam optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

const MAGIC: &str = "EMBAL-POLICY 1";

/// Text checkpoint: header line, feature/action line, one line of weights.
pub fn write_policy<W: Write>(model: &PolicyModel, mut out: W) -> Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(
        out,
        "classes {} no_prop_features {} action_set {} inputs {} hidden {} actions {}",
        model.spec.classes,
        model.spec.no_prop_features,
        model.action_set.id(),
        model.inputs,
        model.hidden,
        model.actions
    )?;
    let weights: Vec<String> = model.params.iter().map(|w| format!("{w:e}")).collect();
    writeln!(out, "{}", weights.join(" "))?;
    Ok(())
}

pub fn read_policy<R: BufRead>(input: R) -> Result<PolicyModel> {
    let mut lines = input.lines();
    let mut next = |what: &'static str| -> Result<String> {
        lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::format("policy", format!("missing {what}")))
    };
    if next("header")?.trim() != MAGIC {
        return Err(Error::format("policy", "bad header"));
    }
    let meta = next("meta line")?;
    let tokens: Vec<&str> = meta.split_whitespace().collect();
    let field = |key: &str| -> Result<&str> {
        tokens
            .windows(2)
            .find(|w| w[0] == key)
            .map(|w| w[1])
            .ok_or_else(|| Error::format("policy", format!("missing field {key}")))
    };
    let num = |key: &str| -> Result<usize> {
        field(key)?
            .parse()
            .map_err(|_| Error::format("policy", format!("bad {key}")))
    };
    let spec = FeatureSpec {
        classes: num("classes")?,
        no_prop_features: field("no_prop_features")?
            .parse()
            .map_err(|_| Error::format("policy", "bad no_prop_features"))?,
    };
    let action_set: ActionSet = field("action_set")?.parse()?;
    let mut model = PolicyModel::zeros(spec, action_set);
    if (model.inputs, model.hidden, model.actions)
        != (num("inputs")?, num("hidden")?, num("actions")?)
    {
        return Err(Error::format(
            "policy",
            "dimensions disagree with feature spec",
        ));
    }
    let params: Vec<f64> = next("weights")?
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| Error::format("policy", format!("bad weight {t}")))
        })
        .collect::<Result<_>>()?;
    if params.len() != model.params.len() {
        return Err(Error::format(
            "policy",
            format!(
                "expected {} weights, got {}",
                model.params.len(),
                params.len()
            ),
        ));
    }
    model.params = params;
    Ok(model)
}
