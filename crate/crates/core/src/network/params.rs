use std::collections::HashMap;
use std::sync::Arc;

use funssl_autograd::{Graph, LstmParams, Scalar, Tensor, Var};
use rand::Rng;

use super::{BlockKind, ModelConfig};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParamInit {
    Uniform(f64),
    Const(f64),
    /// Uniform LSTM bias with the forget-gate slice set to 1.
    LstmBias { hidden: usize, bound: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamDecl {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: ParamInit,
}

struct Decls(Vec<ParamDecl>);

impl Decls {
    fn add(&mut self, name: String, shape: &[usize], init: ParamInit) {
        self.0.push(ParamDecl {
            name,
            shape: shape.to_vec(),
            init,
        });
    }

    fn fc(&mut self, p: &str, din: usize, dout: usize) {
        let b = 1.0 / (din as f64).sqrt();
        self.add(format!("{p}.w"), &[din, dout], ParamInit::Uniform(b));
        self.add(format!("{p}.b"), &[dout], ParamInit::Const(0.0));
    }

    fn prelu(&mut self, p: &str) {
        self.add(format!("{p}.prelu"), &[1], ParamInit::Const(0.25));
    }

    fn cln(&mut self, p: &str, c: usize) {
        self.add(format!("{p}.cln.gain"), &[c], ParamInit::Const(1.0));
        self.add(format!("{p}.cln.bias"), &[c], ParamInit::Const(0.0));
    }

    fn lstm(&mut self, p: &str, din: usize, h: usize) {
        let b = 1.0 / (h as f64).sqrt();
        self.add(format!("{p}.w_ih"), &[din, 4 * h], ParamInit::Uniform(b));
        self.add(format!("{p}.w_hh"), &[h, 4 * h], ParamInit::Uniform(b));
        self.add(format!("{p}.bias"), &[4 * h], ParamInit::LstmBias { hidden: h, bound: b });
    }

    fn dwconv(&mut self, p: &str, c: usize, k: [usize; 2]) {
        let b = 1.0 / ((k[0] * k[1]) as f64).sqrt();
        self.add(format!("{p}.kernel"), &[c, k[0], k[1]], ParamInit::Uniform(b));
        self.add(format!("{p}.bias"), &[c], ParamInit::Const(0.0));
    }
}

/// Every trainable tensor of the model, in a fixed order.
pub fn declare_params(cfg: &ModelConfig) -> Vec<ParamDecl> {
    let mut d = Decls(Vec::new());
    let c1 = cfg.c1;
    for i in 0..cfg.n_blocks {
        let cin = if i == 0 { cfg.input_channels() } else { c1 };
        let b = format!("block{i}");
        match cfg.kind {
            BlockKind::Fun => {
                d.fc(&format!("{b}.embed.fc"), cin, c1);
                d.prelu(&format!("{b}.embed"));
                d.cln(&format!("{b}.embed"), c1);
                d.lstm(&format!("{b}.full.fwd"), c1, c1 / 2);
                d.lstm(&format!("{b}.full.bwd"), c1, c1 / 2);
                for j in 1..=3 {
                    let p = format!("{b}.down{j}");
                    d.dwconv(&p, c1, [5, 2 * cfg.h[j - 1]]);
                    d.prelu(&p);
                    d.cln(&p, c1);
                }
                for s in (0..=3).rev() {
                    d.lstm(&format!("{b}.narrow{s}"), c1, c1);
                }
                for j in 1..=3 {
                    let p = format!("{b}.up{j}");
                    d.dwconv(&p, c1, [5, 2 * cfg.h[3 - j]]);
                    d.prelu(&p);
                    d.cln(&p, c1);
                }
            }
            BlockKind::Fn => {
                d.lstm(&format!("{b}.full.fwd"), cin, c1 / 2);
                d.lstm(&format!("{b}.full.bwd"), cin, c1 / 2);
                d.lstm(&format!("{b}.narrow"), c1 + cin, c1);
                d.fc(&format!("{b}.proj"), c1 + cin, c1);
            }
        }
    }
    d.fc("head.pw1", c1, cfg.c2);
    d.prelu("head");
    d.dwconv("head.dw", cfg.c2, [3, 3]);
    d.fc("head.pw2", cfg.c2, cfg.output_channels());
    d.0
}

/// Named parameter tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore<T> {
    pub names: Vec<String>,
    pub tensors: Vec<Tensor<T>>,
    index: Arc<HashMap<String, usize>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn from_parts(names: Vec<String>, tensors: Vec<Tensor<T>>) -> Result<Self> {
        if names.len() != tensors.len() {
            return Err(Error::Input("parameter names and tensors differ in count".into()));
        }
        let index: HashMap<String, usize> =
            names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        if index.len() != names.len() {
            return Err(Error::Input("duplicate parameter name".into()));
        }
        Ok(Self {
            names,
            tensors,
            index: Arc::new(index),
        })
    }

    pub fn init<R: Rng + ?Sized>(decls: &[ParamDecl], rng: &mut R) -> Self {
        let tensors = decls
            .iter()
            .map(|d| match d.init {
                ParamInit::Uniform(b) => Tensor::uniform(&d.shape, b, rng),
                ParamInit::Const(v) => Tensor::full(&d.shape, T::lit(v)),
                ParamInit::LstmBias { hidden, bound } => {
                    let mut t = Tensor::uniform(&d.shape, bound, rng);
                    t.data_mut()[hidden..2 * hidden].iter_mut().for_each(|v| *v = T::one());
                    t
                }
            })
            .collect();
        Self::from_parts(decls.iter().map(|d| d.name.clone()).collect(), tensors)
            .expect("declared names are unique")
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.index.get(name).map(|&i| &self.tensors[i])
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|t| t.cast()).collect(),
            index: self.index.clone(),
        }
    }

    /// Checks names and shapes against `decls`.
    pub fn check_against(&self, decls: &[ParamDecl]) -> Result<()> {
        if decls.len() != self.len() {
            return Err(Error::Config(format!(
                "{} parameters stored, configuration declares {}",
                self.len(),
                decls.len()
            )));
        }
        for (d, (n, t)) in decls.iter().zip(self.names.iter().zip(&self.tensors)) {
            if &d.name != n || d.shape != t.shape() {
                return Err(Error::Config(format!(
                    "parameter {n} {:?} does not match declared {} {:?}",
                    t.shape(),
                    d.name,
                    d.shape
                )));
            }
        }
        Ok(())
    }

    /// Places every tensor on `g`, as gradient leaves when `trainable`.
    pub fn bind(&self, g: &mut Graph<T>, trainable: bool) -> Bound {
        let vars = self
            .tensors
            .iter()
            .map(|t| if trainable { g.leaf(t.clone()) } else { g.constant(t.clone()) })
            .collect();
        Bound {
            vars,
            index: self.index.clone(),
        }
    }

    /// Names the already-placed `vars` (one per tensor, in store order).
    pub fn bind_vars(&self, vars: Vec<Var>) -> Result<Bound> {
        if vars.len() != self.tensors.len() {
            return Err(Error::Config(format!(
                "{} variables for {} parameters",
                vars.len(),
                self.tensors.len()
            )));
        }
        Ok(Bound {
            vars,
            index: self.index.clone(),
        })
    }
}

/// Parameters placed on a graph.
#[derive(Clone, Debug)]
pub struct Bound {
    pub vars: Vec<Var>,
    index: Arc<HashMap<String, usize>>,
}

impl Bound {
    pub fn var(&self, name: &str) -> Result<Var> {
        self.index
            .get(name)
            .map(|&i| self.vars[i])
            .ok_or_else(|| Error::Config(format!("missing parameter {name}")))
    }

    pub fn lstm(&self, prefix: &str) -> Result<LstmParams> {
        Ok(LstmParams {
            w_ih: self.var(&format!("{prefix}.w_ih"))?,
            w_hh: self.var(&format!("{prefix}.w_hh"))?,
            bias: self.var(&format!("{prefix}.bias"))?,
        })
    }
}
