use crate::error::{Error, Result};

/// Which vertices carry a known class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelState {
    n_vertices: usize,
    n_classes: usize,
    /// `(vertex, class)` sorted by vertex.
    labeled: Vec<(usize, usize)>,
}

impl LabelState {
    pub fn new(n_vertices: usize, n_classes: usize, mut labeled: Vec<(usize, usize)>) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {n_classes}")));
        }
        labeled.sort_unstable();
        for w in labeled.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Config(format!("vertex {} labeled twice", w[0].0)));
            }
        }
        for &(v, c) in &labeled {
            if v >= n_vertices {
                return Err(Error::Config(format!(
                    "labeled vertex {v} out of range (n = {n_vertices})"
                )));
            }
            if c >= n_classes {
                return Err(Error::Config(format!("class {c} out of range (L = {n_classes})")));
            }
        }
        Ok(LabelState {
            n_vertices,
            n_classes,
            labeled,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn labeled(&self) -> &[(usize, usize)] {
        &self.labeled
    }

    pub fn n_labeled(&self) -> usize {
        self.labeled.len()
    }

    pub fn unlabeled(&self) -> Vec<usize> {
        let mask = self.mask();
        (0..self.n_vertices).filter(|&v| !mask[v]).collect()
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_vertices];
        for &(v, _) in &self.labeled {
            mask[v] = true;
        }
        mask
    }

    pub fn label_of(&self, v: usize) -> Option<usize> {
        self.labeled
            .binary_search_by_key(&v, |&(u, _)| u)
            .ok()
            .map(|i| self.labeled[i].1)
    }

    /// Fails with the first class that has no labeled vertex.
    pub fn check_all_classes_labeled(&self) -> Result<()> {
        let mut seen = vec![false; self.n_classes];
        for &(_, c) in &self.labeled {
            seen[c] = true;
        }
        match seen.iter().position(|s| !s) {
            Some(c) => Err(Error::MissingClassLabel(c)),
            None => Ok(()),
        }
    }

    /// Re-indexes onto a view whose vertex `i` is original vertex `kept[i]`.
    /// Labeled vertices missing from the view are dropped.
    pub fn restrict(&self, kept: &[usize]) -> LabelState {
        let labeled = kept
            .iter()
            .enumerate()
            .filter_map(|(i, &orig)| self.label_of(orig).map(|c| (i, c)))
            .collect();
        LabelState {
            n_vertices: kept.len(),
            n_classes: self.n_classes,
            labeled,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_queries() {
        let s = LabelState::new(5, 2, vec![(3, 1), (0, 0)]).unwrap();
        assert_eq!(s.labeled(), &[(0, 0), (3, 1)]);
        assert_eq!(s.unlabeled(), vec![1, 2, 4]);
        assert_eq!(s.label_of(3), Some(1));
        assert_eq!(s.label_of(2), None);
        s.check_all_classes_labeled().unwrap();
        let r = s.restrict(&[1, 3, 4]);
        assert_eq!(r.labeled(), &[(1, 1)]);
        assert!(matches!(
            r.check_all_classes_labeled(),
            Err(Error::MissingClassLabel(0))
        ));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(LabelState::new(3, 2, vec![(3, 0)]).is_err());
        assert!(LabelState::new(3, 2, vec![(1, 2)]).is_err());
        assert!(LabelState::new(3, 2, vec![(1, 0), (1, 1)]).is_err());
        assert!(LabelState::new(3, 1, vec![]).is_err());
    }
}
