//! Table factors over discrete variables, with a floating log-scale so
//! long products of small likelihoods do not underflow.
//!
//! A factor's true values are `values[i] * exp(log_scale)`. Variables are
//! kept sorted ascending; values are row-major with the last variable
//! varying fastest.

/// Hard ceiling on table size; hit this and the construction is a bug.
const MAX_TABLE_ENTRIES: usize = 1 << 24;

#[derive(Debug, Clone)]
pub struct Factor {
    vars: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
    log_scale: f64,
}

impl Factor {
    /// Unit factor over the given (sorted) variables, all entries 1.
    pub fn unit(vars: Vec<usize>, cards: Vec<usize>) -> Factor {
        debug_assert!(vars.windows(2).all(|w| w[0] < w[1]));
        let total: usize = cards.iter().product();
        assert!(total <= MAX_TABLE_ENTRIES, "factor table too large: {total}");
        Factor { vars, cards, values: vec![1.0; total.max(1)], log_scale: 0.0 }
    }

    /// Scalar factor (empty scope).
    pub fn scalar(value: f64) -> Factor {
        Factor { vars: vec![], cards: vec![], values: vec![value], log_scale: 0.0 }
    }

    pub fn from_values(vars: Vec<usize>, cards: Vec<usize>, values: Vec<f64>) -> Factor {
        debug_assert!(vars.windows(2).all(|w| w[0] < w[1]));
        let total: usize = cards.iter().product();
        assert_eq!(values.len(), total.max(1));
        Factor { vars, cards, values, log_scale: 0.0 }
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    #[allow(clippy::len_without_is_empty)] // a factor always has at least one entry
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.vars.is_empty()
    }

    /// Entry for a full assignment (digit per factor variable).
    pub fn value_at(&self, digits: &[usize]) -> f64 {
        debug_assert_eq!(digits.len(), self.vars.len());
        let mut idx = 0;
        for (d, c) in digits.iter().zip(&self.cards) {
            debug_assert!(d < c);
            idx = idx * c + d;
        }
        self.values[idx] * self.log_scale.exp()
    }

    /// Natural log of the sum of all entries; `-inf` for an all-zero table.
    pub fn log_total(&self) -> f64 {
        let sum: f64 = self.values.iter().sum();
        if sum <= 0.0 {
            f64::NEG_INFINITY
        } else {
            sum.ln() + self.log_scale
        }
    }

    pub fn is_all_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// Pull the largest entry into the log scale so mantissas stay near 1.
    fn renormalize_scale(&mut self) {
        let max = self.values.iter().cloned().fold(0.0f64, f64::max);
        if max > 0.0 && !(1e-100..=1e100).contains(&max) {
            for v in &mut self.values {
                *v /= max;
            }
            self.log_scale += max.ln();
        }
    }

    /// Stride of each `vars` entry under row-major, last-fastest layout.
    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.vars.len()];
        for i in (0..self.vars.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.cards[i + 1];
        }
        s
    }

    /// For each variable of `union_vars`, the stride within this factor
    /// (0 when the variable is absent).
    fn strides_in(&self, union_vars: &[usize]) -> Vec<usize> {
        let own = self.strides();
        union_vars
            .iter()
            .map(|v| match self.vars.binary_search(v) {
                Ok(pos) => own[pos],
                Err(_) => 0,
            })
            .collect()
    }

    /// Pointwise product, expanding scopes as needed.
    pub fn product(&self, other: &Factor, union_cards: impl Fn(usize) -> usize) -> Factor {
        let mut vars: Vec<usize> = self.vars.iter().chain(&other.vars).cloned().collect();
        vars.sort_unstable();
        vars.dedup();
        let cards: Vec<usize> = vars.iter().map(|v| union_cards(*v)).collect();
        let total: usize = cards.iter().product::<usize>().max(1);
        assert!(total <= MAX_TABLE_ENTRIES, "factor table too large: {total}");

        let sa = self.strides_in(&vars);
        let sb = other.strides_in(&vars);
        let mut values = vec![0.0; total];
        let mut digits = vec![0usize; vars.len()];
        let mut ia = 0usize;
        let mut ib = 0usize;
        for slot in values.iter_mut() {
            *slot = self.values[ia] * other.values[ib];
            for d in (0..vars.len()).rev() {
                digits[d] += 1;
                ia += sa[d];
                ib += sb[d];
                if digits[d] < cards[d] {
                    break;
                }
                digits[d] = 0;
                ia -= sa[d] * cards[d];
                ib -= sb[d] * cards[d];
            }
        }
        let mut out = Factor { vars, cards, values, log_scale: self.log_scale + other.log_scale };
        out.renormalize_scale();
        out
    }

    /// Sum out every variable not in `keep` (which must be a subset).
    pub fn marginalize(&self, keep: &[usize]) -> Factor {
        debug_assert!(keep.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(keep.iter().all(|v| self.vars.binary_search(v).is_ok()));
        let keep_cards: Vec<usize> = keep
            .iter()
            .map(|v| self.cards[self.vars.binary_search(v).unwrap()])
            .collect();
        let out_total: usize = keep_cards.iter().product::<usize>().max(1);
        let mut values = vec![0.0; out_total];

        // Walk all source entries, maintaining the output index incrementally.
        let out_shell = Factor::unit(keep.to_vec(), keep_cards.clone());
        let out_strides = out_shell.strides_in(&self.vars);
        let mut digits = vec![0usize; self.vars.len()];
        let mut oi = 0usize;
        for v in &self.values {
            values[oi] += v;
            for d in (0..self.vars.len()).rev() {
                digits[d] += 1;
                oi += out_strides[d];
                if digits[d] < self.cards[d] {
                    break;
                }
                digits[d] = 0;
                oi -= out_strides[d] * self.cards[d];
            }
        }
        let mut out =
            Factor { vars: keep.to_vec(), cards: keep_cards, values, log_scale: self.log_scale };
        out.renormalize_scale();
        out
    }

    /// Element-wise division over an identical scope; 0/0 is 0.
    pub fn divide_same_scope(&self, other: &Factor) -> Factor {
        debug_assert_eq!(self.vars, other.vars);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| if *b == 0.0 { 0.0 } else { a / b })
            .collect();
        Factor {
            vars: self.vars.clone(),
            cards: self.cards.clone(),
            values,
            log_scale: self.log_scale - other.log_scale,
        }
    }

    /// Fix some variables to observed states and drop them from the scope.
    pub fn reduce(&self, observed: &dyn Fn(usize) -> Option<usize>) -> Factor {
        let mut keep_vars = Vec::new();
        let mut keep_cards = Vec::new();
        let mut fixed: Vec<Option<usize>> = Vec::with_capacity(self.vars.len());
        for (i, v) in self.vars.iter().enumerate() {
            match observed(*v) {
                Some(state) => {
                    debug_assert!(state < self.cards[i]);
                    fixed.push(Some(state));
                }
                None => {
                    keep_vars.push(*v);
                    keep_cards.push(self.cards[i]);
                    fixed.push(None);
                }
            }
        }
        if keep_vars.len() == self.vars.len() {
            return self.clone();
        }
        let strides = self.strides();
        let base: usize = fixed
            .iter()
            .enumerate()
            .filter_map(|(i, f)| f.map(|s| s * strides[i]))
            .sum();
        let out_total: usize = keep_cards.iter().product::<usize>().max(1);
        let mut values = vec![0.0; out_total];
        let mut digits = vec![0usize; keep_vars.len()];
        let kept_strides: Vec<usize> = (0..self.vars.len())
            .filter(|i| fixed[*i].is_none())
            .map(|i| strides[i])
            .collect();
        let mut si = base;
        for slot in values.iter_mut() {
            *slot = self.values[si];
            for d in (0..keep_vars.len()).rev() {
                digits[d] += 1;
                si += kept_strides[d];
                if digits[d] < keep_cards[d] {
                    break;
                }
                digits[d] = 0;
                si -= kept_strides[d] * keep_cards[d];
            }
        }
        Factor { vars: keep_vars, cards: keep_cards, values, log_scale: self.log_scale }
    }

    /// Normalized distribution over a single remaining variable.
    pub fn normalized_values(&self) -> Vec<f64> {
        let sum: f64 = self.values.iter().sum();
        if sum <= 0.0 {
            return vec![0.0; self.values.len()];
        }
        self.values.iter().map(|v| v / sum).collect()
    }
}
