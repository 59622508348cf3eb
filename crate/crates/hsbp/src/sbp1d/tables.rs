//! Exact coefficient tables for the diagonal-norm operators.
//!
//! Norm weights are in units of h. `qb` holds the boundary rows of Q, each
//! starting at column 0; the right closure is the antisymmetric mirror.
//! The variable-coefficient stiffness is
//!
//!   A = Dᵀ H C D + Σ_k Σ_s w_{k,s} ĉ_{k,s} δ_k[s] δ_k[s]ᵀ / h
//!
//! where δ_k[s] is the undivided k-th difference on points s..=s+k and
//! ĉ_{k,s} a short average of c. Interior weights make the interior stencil
//! order 2p; the first boundary weights of the lowest remainder order restore
//! order p at the boundary. Every weight is positive, so A − DᵀHCD is a sum of
//! positive semidefinite rank-one terms.

use num_rational::BigRational;

use crate::scalar::rat;

pub(crate) struct Remainder {
    pub k: usize,
    /// Averaging weights for ĉ, centred in the k+1 point window.
    pub sample: Vec<BigRational>,
    /// Weight factors for windows starting at s = 0, 1, ... (mirrored at the
    /// right end); windows further in use 1.
    pub boundary: Vec<BigRational>,
}

pub(crate) struct Closure {
    pub hb: Vec<BigRational>,
    pub qb: Vec<Vec<BigRational>>,
    pub interior: Vec<BigRational>,
    pub d0: Vec<BigRational>,
    pub remainder: Vec<Remainder>,
}

fn rats(v: &[&str]) -> Vec<BigRational> {
    v.iter().map(|s| rat(s)).collect()
}

pub(crate) fn closure(p: usize) -> Closure {
    match p {
        1 => Closure {
            hb: rats(&["1/2"]),
            qb: vec![rats(&["-1/2", "1/2"])],
            interior: rats(&["1/2"]),
            d0: rats(&["-3/2", "2", "-1/2"]),
            remainder: vec![Remainder {
                k: 2,
                sample: rats(&["1/4"]),
                boundary: vec![],
            }],
        },
        2 => {
            let hb = rats(&["17/48", "59/48", "43/48", "49/48"]);
            let drows = [
                rats(&["-24/17", "59/34", "-4/17", "-3/34"]),
                rats(&["-1/2", "0", "1/2"]),
                rats(&["4/43", "-59/86", "0", "59/86", "-4/43"]),
                rats(&["3/98", "0", "-59/98", "0", "32/49", "-4/49"]),
            ];
            let qb = drows
                .iter()
                .zip(&hb)
                .map(|(row, w)| row.iter().map(|v| v * w).collect())
                .collect();
            Closure {
                hb,
                qb,
                interior: rats(&["2/3", "-1/12"]),
                d0: rats(&["-11/6", "3", "-3/2", "1/3"]),
                remainder: vec![
                    Remainder {
                        k: 3,
                        sample: rats(&["1/36", "1/36"]),
                        boundary: rats(&["544521/286552", "2637/2107", "185/196"]),
                    },
                    Remainder {
                        k: 4,
                        sample: rats(&["1/144"]),
                        boundary: vec![],
                    },
                ],
            }
        }
        3 => Closure {
            hb: rats(&[
                "13649/43200",
                "12013/8640",
                "2711/4320",
                "5359/4320",
                "7877/8640",
                "43801/43200",
            ]),
            qb: sixth_order_block(),
            interior: rats(&["3/4", "-3/20", "1/60"]),
            d0: rats(&["-25/12", "4", "-3", "4/3", "-1/4"]),
            remainder: vec![
                Remainder {
                    k: 4,
                    sample: rats(&["1/240", "1/240", "1/240"]),
                    boundary: rats(&[
                        "4743986295803950520790160423434955605755596362307/650122982357998642086375791015625000000000000000",
                        "4760216709748961077361409968827367543507897653643/650122982357998642086375791015625000000000000000",
                        "111965942176803267419981/86670222011390625000000",
                        "2212170026675160201/2695472476562500000",
                        "6487891047297287/6159515625000000",
                    ]),
                },
                Remainder {
                    k: 5,
                    sample: rats(&["1/1200", "1/1200"]),
                    boundary: rats(&["2", "2", "2"]),
                },
                Remainder {
                    k: 6,
                    sample: rats(&["1/3600"]),
                    boundary: rats(&["2", "2", "2"]),
                },
            ],
        },
        _ => unreachable!("closure requested for unsupported p={p}"),
    }
}

/// The one-parameter 6th-order family, evaluated at q45 = 0.70127127127127.
fn sixth_order_block() -> Vec<Vec<BigRational>> {
    let x = rat("70127127127127/100000000000000");
    let c = |n: i64| BigRational::from_integer(n.into());
    let mut upper = vec![vec![BigRational::from_integer(0.into()); 6]; 6];
    let mut set = |i: usize, j: usize, v: BigRational| upper[i][j] = v;
    set(0, 1, &x - rat("953/16200"));
    set(0, 2, rat("715489/259200") - c(4) * &x);
    set(0, 3, c(6) * &x - rat("62639/14400"));
    set(0, 4, rat("147127/51840") - c(4) * &x);
    set(0, 5, &x - rat("89387/129600"));
    set(1, 2, c(10) * &x - rat("57139/8640"));
    set(1, 3, rat("745733/51840") - c(20) * &x);
    set(1, 4, c(15) * &x - rat("18343/1728"));
    set(1, 5, rat("240569/86400") - c(4) * &x);
    set(2, 3, c(20) * &x - rat("176839/12960"));
    set(2, 4, rat("242111/17280") - c(20) * &x);
    set(2, 5, c(6) * &x - rat("182261/43200"));
    set(3, 4, c(10) * &x - rat("165041/25920"));
    set(3, 5, rat("710473/259200") - c(4) * &x);
    set(4, 5, x.clone());
    let a = rats(&["3/4", "-3/20", "1/60"]);
    let mut rows = Vec::with_capacity(6);
    for i in 0..6 {
        let mut row = vec![BigRational::from_integer(0.into()); 9];
        for (j, v) in row.iter_mut().enumerate() {
            *v = if j < 6 {
                if i == j {
                    if i == 0 {
                        rat("-1/2")
                    } else {
                        c(0)
                    }
                } else if i < j {
                    upper[i][j].clone()
                } else {
                    -upper[j][i].clone()
                }
            } else if (1..=3).contains(&(j - i)) {
                a[j - i - 1].clone()
            } else {
                c(0)
            };
        }
        rows.push(row);
    }
    rows
}
