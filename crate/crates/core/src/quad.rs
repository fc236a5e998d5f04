//! Composite Gauss-Legendre quadrature.

const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_69),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_34),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_05),
    (-0.183_434_642_495_649_78, 0.362_683_783_378_361_77),
    (0.183_434_642_495_649_78, 0.362_683_783_378_361_77),
    (0.525_532_409_916_329, 0.313_706_645_877_887_05),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_34),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_69),
];

/// Nodes and weights for `∫_a^b`, using 8-point rules on equal pieces no
/// longer than `max_piece`.
pub(crate) fn composite_gauss_legendre(a: f64, b: f64, max_piece: f64) -> Vec<(f64, f64)> {
    if b <= a {
        return Vec::new();
    }
    let pieces = ((b - a) / max_piece).ceil().max(1.0) as usize;
    let h = (b - a) / pieces as f64;
    let mut out = Vec::with_capacity(pieces * GL8.len());
    for k in 0..pieces {
        let mid = a + (k as f64 + 0.5) * h;
        for (x, w) in GL8 {
            out.push((mid + 0.5 * h * x, 0.5 * h * w));
        }
    }
    out
}
