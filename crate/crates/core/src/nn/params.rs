use ndarray::{ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// How a tensor is initialised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Normal with the given std, resampled outside two standard deviations.
    TruncNormal(f64),
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    FanInUniform(usize),
    Zeros,
    Ones,
}

/// Location of one tensor inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamRef {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl ParamRef {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slice<'a>(&self, data: &'a [f64]) -> &'a [f64] {
        &data[self.offset..self.offset + self.len()]
    }

    pub fn slice_mut<'a>(&self, data: &'a mut [f64]) -> &'a mut [f64] {
        &mut data[self.offset..self.offset + self.len()]
    }

    pub fn mat<'a>(&self, data: &'a [f64]) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape((self.rows, self.cols), self.slice(data)).expect("param shape")
    }

    pub fn mat_mut<'a>(&self, data: &'a mut [f64]) -> ArrayViewMut2<'a, f64> {
        ArrayViewMut2::from_shape((self.rows, self.cols), self.slice_mut(data))
            .expect("param shape")
    }

    pub fn vec<'a>(&self, data: &'a [f64]) -> ArrayView1<'a, f64> {
        ArrayView1::from(self.slice(data))
    }

    pub fn vec_mut<'a>(&self, data: &'a mut [f64]) -> ArrayViewMut1<'a, f64> {
        ArrayViewMut1::from(self.slice_mut(data))
    }

    /// Row `r` as a vector view.
    pub fn row<'a>(&self, data: &'a [f64], r: usize) -> ArrayView1<'a, f64> {
        let start = self.offset + r * self.cols;
        ArrayView1::from(&data[start..start + self.cols])
    }

    pub fn row_mut<'a>(&self, data: &'a mut [f64], r: usize) -> ArrayViewMut1<'a, f64> {
        let start = self.offset + r * self.cols;
        ArrayViewMut1::from(&mut data[start..start + self.cols])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub at: ParamRef,
    pub init: Init,
    /// Whether decoupled weight decay applies to this tensor.
    pub decay: bool,
}

/// Registry of named tensors packed into one flat vector.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamLayout {
    pub entries: Vec<ParamEntry>,
    len: usize,
}

impl ParamLayout {
    pub fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize, init: Init) -> ParamRef {
        self.add_with_decay(name, rows, cols, init, false)
    }

    pub fn add_with_decay(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        init: Init,
        decay: bool,
    ) -> ParamRef {
        let at = ParamRef {
            offset: self.len,
            rows,
            cols,
        };
        self.len += rows * cols;
        self.entries.push(ParamEntry {
            name: name.into(),
            at,
            init,
            decay,
        });
        at
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn initialise<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut data = vec![0.0; self.len];
        for e in &self.entries {
            let out = e.at.slice_mut(&mut data);
            match e.init {
                Init::Zeros => {}
                Init::Ones => out.fill(1.0),
                Init::FanInUniform(fan_in) => {
                    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
                    for v in out.iter_mut() {
                        *v = rng.gen_range(-bound..bound);
                    }
                }
                Init::TruncNormal(std) => {
                    let normal = Normal::new(0.0, std).expect("valid std");
                    for v in out.iter_mut() {
                        *v = loop {
                            let s: f64 = normal.sample(rng);
                            if s.abs() <= 2.0 * std {
                                break s;
                            }
                        };
                    }
                }
            }
        }
        data
    }

    /// Per-element weight-decay flags.
    pub fn decay_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.len];
        for e in &self.entries {
            if e.decay {
                mask[e.at.offset..e.at.offset + e.at.len()].fill(true);
            }
        }
        mask
    }

    pub fn find(&self, name: &str) -> Option<&ParamEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
