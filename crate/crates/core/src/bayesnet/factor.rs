/// A table over binary variables; bit `i` of the row index is `vars[i]`.
#[derive(Clone, Debug)]
pub(crate) struct Factor {
    pub vars: Vec<usize>,
    pub table: Vec<f64>,
}

impl Factor {
    pub fn new(vars: Vec<usize>, table: Vec<f64>) -> Self {
        debug_assert_eq!(table.len(), 1 << vars.len());
        Factor { vars, table }
    }

    pub fn indicator(var: usize, value: bool) -> Self {
        let table = if value {
            vec![0.0, 1.0]
        } else {
            vec![1.0, 0.0]
        };
        Factor::new(vec![var], table)
    }

    pub fn mentions(&self, var: usize) -> bool {
        self.vars.contains(&var)
    }

    /// Pointwise product of several factors.
    pub fn product(factors: &[Factor]) -> Factor {
        let mut vars: Vec<usize> = factors
            .iter()
            .flat_map(|f| f.vars.iter().copied())
            .collect();
        vars.sort_unstable();
        vars.dedup();
        let masks: Vec<Vec<usize>> = factors
            .iter()
            .map(|f| {
                f.vars
                    .iter()
                    .map(|v| vars.iter().position(|u| u == v).unwrap())
                    .collect()
            })
            .collect();
        let mut table = vec![1.0; 1 << vars.len()];
        for (row, cell) in table.iter_mut().enumerate() {
            for (f, pos) in factors.iter().zip(&masks) {
                let mut idx = 0;
                for (bit, p) in pos.iter().enumerate() {
                    idx |= ((row >> p) & 1) << bit;
                }
                *cell *= f.table[idx];
                if *cell == 0.0 {
                    break;
                }
            }
        }
        Factor { vars, table }
    }

    pub fn sum_out(&self, var: usize) -> Factor {
        let Some(k) = self.vars.iter().position(|v| *v == var) else {
            return self.clone();
        };
        let mut vars = self.vars.clone();
        vars.remove(k);
        let mut table = vec![0.0; 1 << vars.len()];
        for (row, p) in self.table.iter().enumerate() {
            let low = row & ((1 << k) - 1);
            let high = (row >> (k + 1)) << k;
            table[low | high] += p;
        }
        Factor { vars, table }
    }

    /// Scale so the largest entry is 1; returns false if every entry is 0.
    pub fn rescale(&mut self) -> bool {
        let max = self.table.iter().cloned().fold(0.0, f64::max);
        if max == 0.0 {
            return false;
        }
        for p in &mut self.table {
            *p /= max;
        }
        true
    }
}
