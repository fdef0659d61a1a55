//! Dense f64 tensors, row-major. Training math runs in f64 so gradient
//! checks are clean; the sampling path converts observations from f32 at
//! the model boundary.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n: usize = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![0.0; n] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/data length mismatch");
        Tensor { shape: shape.to_vec(), data }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor { shape: vec![], data: vec![v] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn reshaped(mut self, shape: &[usize]) -> Self {
        assert_eq!(shape.iter().product::<usize>(), self.data.len());
        self.shape = shape.to_vec();
        self
    }

    /// Row `i` of a 2-D tensor.
    pub fn row(&self, i: usize) -> &[f64] {
        assert_eq!(self.shape.len(), 2);
        let w = self.shape[1];
        &self.data[i * w..(i + 1) * w]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        assert_eq!(self.shape.len(), 2);
        let w = self.shape[1];
        &mut self.data[i * w..(i + 1) * w]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.data.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }
}

/// `y[n,out] = x[n,in] · w[out,in]^T + b[out]`, accumulated left-to-right so
/// results are bit-identical for any batch grouping of the same rows.
pub fn linear_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
    let (n, in_dim) = (x.shape()[0], x.shape()[1]);
    let out_dim = w.shape()[0];
    assert_eq!(w.shape()[1], in_dim, "weight/input dim mismatch");
    assert_eq!(b.len(), out_dim);
    let mut y = Tensor::zeros(&[n, out_dim]);
    for i in 0..n {
        let xi = x.row(i);
        let yi = y.row_mut(i);
        for o in 0..out_dim {
            let wo = w.row(o);
            let mut acc = 0.0;
            for k in 0..in_dim {
                acc += xi[k] * wo[k];
            }
            yi[o] = acc + b.data()[o];
        }
    }
    y
}

/// Backward of [`linear_forward`]: returns `(dw, db, dx)`.
pub fn linear_backward(x: &Tensor, w: &Tensor, dy: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (n, in_dim) = (x.shape()[0], x.shape()[1]);
    let out_dim = w.shape()[0];
    assert_eq!(dy.shape(), &[n, out_dim]);
    let mut dw = Tensor::zeros(&[out_dim, in_dim]);
    let mut db = Tensor::zeros(&[out_dim]);
    let mut dx = Tensor::zeros(&[n, in_dim]);
    for i in 0..n {
        let xi = x.row(i);
        let dyi = dy.row(i);
        for o in 0..out_dim {
            let g = dyi[o];
            db.data_mut()[o] += g;
            let dwo = dw.row_mut(o);
            for k in 0..in_dim {
                dwo[k] += g * xi[k];
            }
        }
        let dxi = dx.row_mut(i);
        for o in 0..out_dim {
            let g = dyi[o];
            let wo = w.row(o);
            for k in 0..in_dim {
                dxi[k] += g * wo[k];
            }
        }
    }
    (dw, db, dx)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Nonlinearity {
    Tanh,
    Relu,
}

impl Nonlinearity {
    pub fn apply(self, z: &Tensor) -> Tensor {
        let data = match self {
            Nonlinearity::Tanh => z.data().iter().map(|&v| v.tanh()).collect(),
            Nonlinearity::Relu => z.data().iter().map(|&v| v.max(0.0)).collect(),
        };
        Tensor::from_vec(z.shape(), data)
    }

    /// `dz` given activation output `a` and upstream `da`.
    pub fn backward(self, a: &Tensor, da: &Tensor) -> Tensor {
        let data = match self {
            Nonlinearity::Tanh => a
                .data()
                .iter()
                .zip(da.data())
                .map(|(&av, &dv)| dv * (1.0 - av * av))
                .collect(),
            Nonlinearity::Relu => a
                .data()
                .iter()
                .zip(da.data())
                .map(|(&av, &dv)| if av > 0.0 { dv } else { 0.0 })
                .collect(),
        };
        Tensor::from_vec(a.shape(), data)
    }

    pub fn name(self) -> &'static str {
        match self {
            Nonlinearity::Tanh => "tanh",
            Nonlinearity::Relu => "relu",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Nonlinearity::Tanh),
            "relu" => Ok(Nonlinearity::Relu),
            _ => Err(Error::Parse(format!("unknown nonlinearity `{s}`"))),
        }
    }
}
