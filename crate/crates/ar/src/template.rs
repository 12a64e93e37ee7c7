//! Grid <-> token-sequence template: <mot>, then per part an open tag, the
//! part's codes time-major with residual layers innermost, a close tag, and
//! finally </mot>. Length is always 2 + 5*(2 + n*L).

use motok_prq::TokenGrid;

use crate::vocab::{self, Vocab};
use crate::ArError;

pub fn serialize_tokens(g: &TokenGrid, v: &Vocab) -> Vec<usize> {
    let mut out = Vec::with_capacity(2 + g.parts * (2 + g.steps * g.layers));
    out.push(vocab::MOT_OPEN);
    for p in 0..g.parts {
        out.push(vocab::PART_OPEN[p]);
        for t in 0..g.steps {
            for l in 0..g.layers {
                out.push(v.motion_id(g.token(t, p, l) as usize));
            }
        }
        out.push(vocab::PART_CLOSE[p]);
    }
    out.push(vocab::MOT_CLOSE);
    out
}

/// Strict inverse of [`serialize_tokens`]; `layers` fixes L so n can be
/// inferred. Reports the position of the first violation.
pub fn deserialize_tokens(
    ids: &[usize],
    v: &Vocab,
    layers: usize,
) -> Result<TokenGrid, ArError> {
    let bad = |pos: usize, what: &str| ArError::Malformed { pos, what: what.to_string() };
    let mut pos = 0usize;
    let expect = |want: usize, ids: &[usize], pos: &mut usize| -> Result<(), ArError> {
        match ids.get(*pos) {
            Some(&id) if id == want => {
                *pos += 1;
                Ok(())
            }
            Some(&id) => Err(ArError::Malformed {
                pos: *pos,
                what: format!("expected {}, found {}", v.surface(want), v.surface(id)),
            }),
            None => Err(ArError::Malformed {
                pos: *pos,
                what: format!("expected {}, found end of stream", v.surface(want)),
            }),
        }
    };
    expect(vocab::MOT_OPEN, ids, &mut pos)?;
    let mut per_part: Vec<Vec<usize>> = Vec::with_capacity(5);
    for p in 0..5 {
        expect(vocab::PART_OPEN[p], ids, &mut pos)?;
        let mut codes = Vec::new();
        loop {
            match ids.get(pos) {
                Some(&id) if id == vocab::PART_CLOSE[p] => {
                    pos += 1;
                    break;
                }
                Some(&id) => match v.motion_code(id) {
                    Some(c) => {
                        codes.push(c);
                        pos += 1;
                    }
                    None => {
                        return Err(ArError::Malformed {
                            pos,
                            what: format!(
                                "expected a motion code or </part_{}>, found {}",
                                p + 1,
                                v.surface(id)
                            ),
                        })
                    }
                },
                None => return Err(bad(pos, "unterminated part block")),
            }
        }
        if codes.is_empty() || codes.len() % layers != 0 {
            return Err(ArError::Malformed {
                pos,
                what: format!(
                    "part {} holds {} codes, not a positive multiple of {layers} layers",
                    p + 1,
                    codes.len()
                ),
            });
        }
        if let Some(first) = per_part.first() {
            if codes.len() != first.len() {
                return Err(ArError::Malformed {
                    pos,
                    what: format!(
                        "part {} holds {} codes but part 1 holds {}",
                        p + 1,
                        codes.len(),
                        first.len()
                    ),
                });
            }
        }
        per_part.push(codes);
    }
    expect(vocab::MOT_CLOSE, ids, &mut pos)?;
    if pos != ids.len() {
        return Err(bad(pos, "trailing tokens after </mot>"));
    }
    let n = per_part[0].len() / layers;
    let mut indices = vec![0u16; n * 5 * layers];
    for (p, codes) in per_part.iter().enumerate() {
        for t in 0..n {
            for l in 0..layers {
                indices[(t * 5 + p) * layers + l] = codes[t * layers + l] as u16;
            }
        }
    }
    Ok(TokenGrid::new(n, 5, layers, v.k_c(), indices)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn serialized_length_matches_formula() {
        let v = Vocab::build(16, &[]);
        let g = TokenGrid::new(2, 5, 2, 16, vec![0; 20]).unwrap();
        let ids = serialize_tokens(&g, &v);
        assert_eq!(ids.len(), 2 + 5 * (2 + 2 * 2));
        assert_eq!(ids.len(), 32);
    }

    #[test]
    fn round_trip_on_random_grids() {
        let v = Vocab::build(64, &[]);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let n = rng.gen_range(1..6);
            let layers = rng.gen_range(1..4);
            let indices: Vec<u16> =
                (0..n * 5 * layers).map(|_| rng.gen_range(0..64) as u16).collect();
            let g = TokenGrid::new(n, 5, layers, 64, indices).unwrap();
            let ids = serialize_tokens(&g, &v);
            let back = deserialize_tokens(&ids, &v, layers).unwrap();
            assert_eq!(g, back);
        }
    }

    #[test]
    fn violations_report_first_bad_position() {
        let v = Vocab::build(8, &[]);
        let g = TokenGrid::new(1, 5, 1, 8, vec![0; 5]).unwrap();
        let mut ids = serialize_tokens(&g, &v);
        // Swap <part_2> open for <part_3>'s: the stream breaks at index 4.
        assert_eq!(ids[4], vocab::PART_OPEN[1]);
        ids[4] = vocab::PART_OPEN[2];
        match deserialize_tokens(&ids, &v, 1) {
            Err(ArError::Malformed { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("expected malformed error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_stream_is_rejected() {
        let v = Vocab::build(8, &[]);
        let g = TokenGrid::new(2, 5, 1, 8, vec![3; 10]).unwrap();
        let ids = serialize_tokens(&g, &v);
        assert!(deserialize_tokens(&ids[..ids.len() - 1], &v, 1).is_err());
    }
}
