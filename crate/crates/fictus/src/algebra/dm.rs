use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::matching::Matching;
use super::pattern::SparsePattern;
use crate::error::{Error, Result};

/// Coarse Dulmage–Mendelsohn decomposition.
///
/// Rows are permuted as [HR, SR, VR matched, VR unmatched] and columns as
/// [HC unmatched, HC matched, SC, VC], giving
///
/// ```text
/// P11 P12 P13 P14
///  0   0  P23 P24
///  0   0   0  P34
///  0   0   0  P44
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DMDecomposition {
    pub matching: Vec<(usize, usize)>,
    pub vr: Vec<usize>,
    pub hr: Vec<usize>,
    pub sr: Vec<usize>,
    pub vc: Vec<usize>,
    pub hc: Vec<usize>,
    pub sc: Vec<usize>,
    pub row_perm: Vec<usize>,
    pub col_perm: Vec<usize>,
    /// Five row offsets and five column offsets delimiting the 4×4 block grid.
    pub row_blocks: [usize; 5],
    pub col_blocks: [usize; 5],
}

impl DMDecomposition {
    /// Coarse block index (0..4) of every row and column.
    pub fn block_of(&self) -> (Vec<usize>, Vec<usize>) {
        let mut rb = vec![0; self.row_perm.len()];
        for b in 0..4 {
            for &r in &self.row_perm[self.row_blocks[b]..self.row_blocks[b + 1]] {
                rb[r] = b;
            }
        }
        let mut cb = vec![0; self.col_perm.len()];
        for b in 0..4 {
            for &c in &self.col_perm[self.col_blocks[b]..self.col_blocks[b + 1]] {
                cb[c] = b;
            }
        }
        (rb, cb)
    }
}

pub fn dulmage_mendelsohn(pat: &SparsePattern, mt: &Matching) -> Result<DMDecomposition> {
    let (nr, nc) = (pat.rows, pat.cols);
    if mt.row_to_col.len() != nr || mt.col_to_row.len() != nc {
        return Err(Error::DimensionMismatch("matching does not fit the pattern".into()));
    }
    let radj = pat.row_adjacency();
    let cadj = pat.col_adjacency();
    for (r, c) in mt.edges() {
        if radj[r].binary_search(&c).is_err() {
            return Err(Error::InvalidArgument(format!("matched edge ({r}, {c}) is not in the pattern")));
        }
    }

    // rows/cols reachable from unmatched rows: row -any edge-> col -matched-> row
    let mut in_vr = vec![false; nr];
    let mut in_vc = vec![false; nc];
    let mut q: VecDeque<usize> = (0..nr).filter(|&r| mt.row_to_col[r].is_none()).collect();
    for &r in &q {
        in_vr[r] = true;
    }
    while let Some(r) = q.pop_front() {
        for &c in &radj[r] {
            if in_vc[c] {
                continue;
            }
            in_vc[c] = true;
            match mt.col_to_row[c] {
                Some(r2) if !in_vr[r2] => {
                    in_vr[r2] = true;
                    q.push_back(r2);
                }
                Some(_) => {}
                None => return Err(Error::InvalidMatching(r)),
            }
        }
    }

    let mut in_hr = vec![false; nr];
    let mut in_hc = vec![false; nc];
    let mut q: VecDeque<usize> = (0..nc).filter(|&c| mt.col_to_row[c].is_none()).collect();
    for &c in &q {
        in_hc[c] = true;
    }
    while let Some(c) = q.pop_front() {
        for &r in &cadj[c] {
            if in_hr[r] {
                continue;
            }
            in_hr[r] = true;
            match mt.row_to_col[r] {
                Some(c2) if !in_hc[c2] => {
                    in_hc[c2] = true;
                    q.push_back(c2);
                }
                Some(_) => {}
                None => return Err(Error::InvalidMatching(r)),
            }
        }
    }
    if (0..nr).any(|r| in_vr[r] && in_hr[r]) || (0..nc).any(|c| in_vc[c] && in_hc[c]) {
        return Err(Error::InvalidMatching(0));
    }

    let vr: Vec<usize> = (0..nr).filter(|&r| in_vr[r]).collect();
    let hr: Vec<usize> = (0..nr).filter(|&r| in_hr[r]).collect();
    let sr: Vec<usize> = (0..nr).filter(|&r| !in_vr[r] && !in_hr[r]).collect();
    let vc: Vec<usize> = (0..nc).filter(|&c| in_vc[c]).collect();
    let hc: Vec<usize> = (0..nc).filter(|&c| in_hc[c]).collect();
    let sc: Vec<usize> = (0..nc).filter(|&c| !in_vc[c] && !in_hc[c]).collect();

    // square blocks keep the matching on their diagonal
    let hc_unmatched: Vec<usize> = hc.iter().copied().filter(|&c| mt.col_to_row[c].is_none()).collect();
    let hc_matched: Vec<usize> = hc.iter().copied().filter(|&c| mt.col_to_row[c].is_some()).collect();
    let hr_ordered: Vec<usize> = hc_matched.iter().map(|&c| mt.col_to_row[c].unwrap()).collect();
    let sc_ordered: Vec<usize> = sr.iter().map(|&r| mt.row_to_col[r].unwrap()).collect();
    let vr_matched: Vec<usize> = vr.iter().copied().filter(|&r| mt.row_to_col[r].is_some()).collect();
    let vr_unmatched: Vec<usize> = vr.iter().copied().filter(|&r| mt.row_to_col[r].is_none()).collect();
    let vc_ordered: Vec<usize> = vr_matched.iter().map(|&r| mt.row_to_col[r].unwrap()).collect();

    let row_perm: Vec<usize> = [&hr_ordered[..], &sr, &vr_matched, &vr_unmatched].concat();
    let col_perm: Vec<usize> = [&hc_unmatched[..], &hc_matched, &sc_ordered, &vc_ordered].concat();
    if row_perm.len() != nr || col_perm.len() != nc {
        return Err(Error::InvalidMatching(0));
    }
    let row_blocks = [
        0,
        hr.len(),
        hr.len() + sr.len(),
        hr.len() + sr.len() + vr_matched.len(),
        nr,
    ];
    let col_blocks = [
        0,
        hc_unmatched.len(),
        hc.len(),
        hc.len() + sc.len(),
        nc,
    ];
    Ok(DMDecomposition {
        matching: mt.edges(),
        vr,
        hr,
        sr,
        vc,
        hc,
        sc,
        row_perm,
        col_perm,
        row_blocks,
        col_blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::super::matching::{hopcroft_karp, maximum_matching};
    use super::*;

    fn example_4x3() -> SparsePattern {
        SparsePattern::from_triplets(4, 3, &[(0, 0, 1.0), (0, 1, 1.0), (1, 2, 1.0), (2, 1, 1.0), (3, 0, 1.0), (3, 2, 1.0)]).unwrap()
    }

    #[test]
    fn overdetermined_example_all_rows_in_vr() {
        let p = example_4x3();
        let mut m1 = Matching::empty(4, 3);
        m1.insert(0, 0);
        m1.insert(1, 2);
        m1.insert(2, 1);
        let d = dulmage_mendelsohn(&p, &m1).unwrap();
        assert_eq!(d.vr, vec![0, 1, 2, 3]);
        assert_eq!(d.vc, vec![0, 1, 2]);
        assert!(d.hr.is_empty() && d.sr.is_empty());
    }

    #[test]
    fn non_maximum_matching_rejected() {
        let p = example_4x3();
        let mut m = Matching::empty(4, 3);
        m.insert(0, 0);
        assert!(matches!(dulmage_mendelsohn(&p, &m), Err(Error::InvalidMatching(_))));
    }

    #[test]
    fn square_perfect_is_single_block() {
        // cyclic 3×3 with diagonal: strongly connected, perfectly matched
        let p = SparsePattern::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0), (0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap();
        let d = dulmage_mendelsohn(&p, &maximum_matching(&p)).unwrap();
        assert_eq!(d.sr.len(), 3);
        assert_eq!(d.sc.len(), 3);
        assert_eq!(d.row_blocks, [0, 0, 3, 3, 3]);
        assert_eq!(d.col_blocks, [0, 0, 0, 3, 3]);
    }

    #[test]
    fn underdetermined_rows_go_to_hr() {
        let p = SparsePattern::from_triplets(2, 3, &[(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let mt = hopcroft_karp(&p.row_adjacency(), 3, None);
        let d = dulmage_mendelsohn(&p, &mt).unwrap();
        assert_eq!(d.hr, vec![0, 1]);
        assert_eq!(d.hc, vec![0, 1, 2]);
        assert_eq!(d.col_blocks[1], 1);
    }
}
