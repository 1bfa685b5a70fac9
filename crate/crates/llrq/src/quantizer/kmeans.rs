//! Mini-batch k-means scalar codebooks and the three-component latent
//! quantizer built from them.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Full-batch Lloyd refinement passes run after the mini-batch phase.
pub const LLOYD_PASSES: usize = 10;

/// Mini-batch k-means settings.
#[derive(Clone, Copy, Debug)]
pub struct KmeansConfig {
    pub minibatch: usize,
    /// Mini-batch iterations before the full-batch refinement passes.
    pub iterations: usize,
    pub seed: u64,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        KmeansConfig {
            minibatch: 1024,
            iterations: 100,
            seed: 1,
        }
    }
}

/// A sorted scalar codebook with `2^bits` reconstruction levels.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarCodebook {
    levels: Vec<f64>,
    bits: usize,
}

fn next_up(x: f64) -> f64 {
    f64::from_bits(x.to_bits() + 1)
}

impl ScalarCodebook {
    /// Wraps explicit levels; they must be strictly increasing and count
    /// `2^bits`.
    pub fn from_levels(levels: Vec<f64>, bits: usize) -> Result<Self> {
        if levels.len() != 1usize << bits {
            return Err(Error::invalid_argument(format!(
                "expected {} levels for {} bits, got {}",
                1usize << bits,
                bits,
                levels.len()
            )));
        }
        if levels.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::invalid_argument(
                "codebook levels must be strictly increasing",
            ));
        }
        if levels.iter().any(|l| !l.is_finite()) {
            return Err(Error::invalid_argument("codebook levels must be finite"));
        }
        Ok(ScalarCodebook { levels, bits })
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Nearest level; exactly halfway between two levels picks the lower
    /// one.
    pub fn quantize(&self, x: f64) -> (usize, f64) {
        // Cell boundaries are the midpoints; counting boundaries strictly
        // below x sends a midpoint hit to the lower cell.
        let idx = self
            .levels
            .windows(2)
            .map(|p| 0.5 * (p[0] + p[1]))
            .filter(|&m| m < x)
            .count();
        (idx, self.levels[idx])
    }
}

/// Mean squared distance from each sample to its nearest level.
pub fn distortion(codebook: &ScalarCodebook, samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples
        .iter()
        .map(|&x| {
            let (_, l) = codebook.quantize(x);
            (x - l) * (x - l)
        })
        .sum::<f64>()
        / samples.len() as f64
}

/// Distance-weighted random seeding: each new center is drawn with
/// probability proportional to the squared distance to the nearest center
/// chosen so far.
fn seed_centers(samples: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = samples.len();
    let mut centers = Vec::with_capacity(k);
    centers.push(samples[rng.gen_range(0..n)]);
    let mut d2: Vec<f64> = samples
        .iter()
        .map(|&x| (x - centers[0]) * (x - centers[0]))
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            samples[chosen]
        } else {
            // All mass sits on the chosen centers already; any sample works.
            samples[rng.gen_range(0..n)]
        };
        centers.push(next);
        for (d, &x) in d2.iter_mut().zip(samples) {
            *d = d.min((x - next) * (x - next));
        }
    }
    centers
}

fn nearest(centers: &[f64], x: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &c) in centers.iter().enumerate() {
        let d = (x - c) * (x - c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Fits a `2^bits`-level codebook: distance-weighted seeding, a mini-batch
/// pass in the style of the web-scale k-means algorithm, then
/// `LLOYD_PASSES` full-batch refinements. Returns the codebook together
/// with the mean squared distortion measured after each full-batch pass.
pub fn kmeans_fit_traced(
    samples: &[f64],
    bits: usize,
    cfg: &KmeansConfig,
) -> Result<(ScalarCodebook, Vec<f64>)> {
    if bits > 16 {
        return Err(Error::invalid_argument(format!(
            "codebooks beyond 16 bits per component are not supported, got {bits}"
        )));
    }
    let k = 1usize << bits;
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid_argument("samples must be finite"));
    }
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() < k {
        return Err(Error::invalid_argument(format!(
            "need at least {k} distinct samples for a {bits}-bit codebook, got {}",
            sorted.len()
        )));
    }

    if bits == 0 {
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let cb = ScalarCodebook {
            levels: vec![mean],
            bits: 0,
        };
        let d = distortion(&cb, samples);
        return Ok((cb, vec![d]));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut centers = seed_centers(samples, k, &mut rng);

    // Mini-batch phase: per-center counts give each center a decaying
    // step size.
    let mut counts = vec![0u64; k];
    let batch = cfg.minibatch.max(1);
    for _ in 0..cfg.iterations {
        for _ in 0..batch {
            let x = samples[rng.gen_range(0..samples.len())];
            let c = nearest(&centers, x);
            counts[c] += 1;
            let eta = 1.0 / counts[c] as f64;
            centers[c] += eta * (x - centers[c]);
        }
    }

    // Full-batch Lloyd refinements. A cluster that ends up empty keeps its
    // previous center.
    let mut trace = Vec::with_capacity(LLOYD_PASSES);
    for _ in 0..LLOYD_PASSES {
        let mut sums = vec![0.0f64; k];
        let mut ns = vec![0u64; k];
        for &x in samples {
            let c = nearest(&centers, x);
            sums[c] += x;
            ns[c] += 1;
        }
        for c in 0..k {
            if ns[c] > 0 {
                centers[c] = sums[c] / ns[c] as f64;
            }
        }
        trace.push(
            samples
                .iter()
                .map(|&x| {
                    let c = nearest(&centers, x);
                    (x - centers[c]) * (x - centers[c])
                })
                .sum::<f64>()
                / samples.len() as f64,
        );
    }

    centers.sort_by(f64::total_cmp);
    // Exactly coincident centers would break the strict-ordering invariant;
    // separate them by the smallest representable amount.
    for i in 1..centers.len() {
        if centers[i] <= centers[i - 1] {
            centers[i] = next_up(centers[i - 1]);
        }
    }
    Ok((
        ScalarCodebook {
            levels: centers,
            bits,
        },
        trace,
    ))
}

/// `kmeans_fit_traced` without the distortion trace.
pub fn kmeans_fit(samples: &[f64], bits: usize, cfg: &KmeansConfig) -> Result<ScalarCodebook> {
    kmeans_fit_traced(samples, bits, cfg).map(|(cb, _)| cb)
}

/// Independent scalar codebooks for the three latent components.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentQuantizer {
    components: Vec<ScalarCodebook>,
}

impl LatentQuantizer {
    pub fn from_components(components: Vec<ScalarCodebook>) -> Result<Self> {
        if components.len() != 3 {
            return Err(Error::invalid_argument(format!(
                "a latent quantizer needs exactly 3 component codebooks, got {}",
                components.len()
            )));
        }
        Ok(LatentQuantizer { components })
    }

    /// Fits one codebook per latent column. Component fits use distinct
    /// seeds derived from the configured one.
    pub fn fit(latents: ArrayView2<f64>, bits: &[usize; 3], cfg: &KmeansConfig) -> Result<Self> {
        if latents.ncols() != 3 {
            return Err(Error::invalid_argument(format!(
                "latent matrix must have 3 columns, got {}",
                latents.ncols()
            )));
        }
        let mut components = Vec::with_capacity(3);
        for (i, &b) in bits.iter().enumerate() {
            let column: Vec<f64> = latents.column(i).iter().copied().collect();
            let comp_cfg = KmeansConfig {
                seed: cfg.seed.wrapping_add(i as u64),
                ..*cfg
            };
            components.push(kmeans_fit(&column, b, &comp_cfg)?);
        }
        Ok(LatentQuantizer { components })
    }

    pub fn components(&self) -> &[ScalarCodebook] {
        &self.components
    }

    pub fn total_bits(&self) -> usize {
        self.components.iter().map(ScalarCodebook::bits).sum()
    }

    /// Per-component nearest levels. Because the components are quantized
    /// independently, this is exactly the Euclidean-nearest triple of the
    /// product codebook.
    pub fn quantize(&self, z: [f64; 3]) -> ([f64; 3], [usize; 3]) {
        let mut out = [0.0; 3];
        let mut idx = [0usize; 3];
        for i in 0..3 {
            let (j, l) = self.components[i].quantize(z[i]);
            idx[i] = j;
            out[i] = l;
        }
        (out, idx)
    }

    /// Quantizes every row of an `n x 3` latent matrix in place.
    pub fn quantize_rows(&self, z: &mut ndarray::Array2<f64>) {
        assert_eq!(z.ncols(), 3);
        for i in 0..3 {
            let cb = &self.components[i];
            for v in z.column_mut(i).iter_mut() {
                *v = cb.quantize(*v).1;
            }
        }
    }

    /// Plain text format: a `[component i]` header per codebook followed by
    /// one level per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let res: std::io::Result<()> = (|| {
            for (i, comp) in self.components.iter().enumerate() {
                writeln!(w, "[component {}]", i + 1)?;
                for l in comp.levels() {
                    writeln!(w, "{l}")?;
                }
            }
            w.flush()
        })();
        res.map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let mut sections: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            let lineno = lineno + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') {
                let expected = format!("[component {}]", sections.len() + 1);
                if line != expected {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("expected section header {expected}, got {line}"),
                    });
                }
                sections.push(Vec::new());
                continue;
            }
            let value: f64 = line.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("not a number: {line}"),
            })?;
            match sections.last_mut() {
                Some(s) => s.push(value),
                None => {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: "level before any [component i] header".into(),
                    })
                }
            }
        }
        if sections.len() != 3 {
            return Err(Error::Parse {
                line: 0,
                msg: format!("expected 3 component sections, got {}", sections.len()),
            });
        }
        let mut components = Vec::with_capacity(3);
        for levels in sections {
            if !levels.len().is_power_of_two() {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("component has {} levels, not a power of two", levels.len()),
                });
            }
            let bits = levels.len().trailing_zeros() as usize;
            components.push(ScalarCodebook::from_levels(levels, bits)?);
        }
        LatentQuantizer::from_components(components)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand_distr::{Distribution, StandardNormal};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn gaussian_samples(n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng(seed);
        (0..n)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut r);
                (g * 0.8).tanh()
            })
            .collect()
    }

    #[test]
    fn zero_bits_returns_the_mean() {
        let samples = [0.1, 0.2, 0.6, -0.5];
        let cb = kmeans_fit(&samples, 0, &KmeansConfig::default()).unwrap();
        let mean = samples.iter().sum::<f64>() / 4.0;
        assert_eq!(cb.levels().len(), 1);
        assert!((cb.levels()[0] - mean).abs() < 1e-15);
    }

    #[test]
    fn recovers_exactly_clustered_values() {
        let values = [-0.5, -0.1, 0.3, 0.8];
        let mut samples = Vec::new();
        for &v in &values {
            samples.extend(std::iter::repeat(v).take(50));
        }
        let cb = kmeans_fit(&samples, 2, &KmeansConfig::default()).unwrap();
        for (l, v) in cb.levels().iter().zip(&values) {
            assert!((l - v).abs() < 1e-12, "level {l} vs value {v}");
        }
        assert!(distortion(&cb, &samples) < 1e-24);
    }

    #[test]
    fn refinement_distortion_is_monotone_nonincreasing() {
        let samples = gaussian_samples(20000, 3);
        let (_, trace) = kmeans_fit_traced(&samples, 4, &KmeansConfig::default()).unwrap();
        assert_eq!(trace.len(), LLOYD_PASSES);
        for pair in trace.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-15,
                "distortion increased: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn rejects_insufficient_distinct_samples() {
        let samples = [0.25f64; 100];
        assert!(kmeans_fit(&samples, 1, &KmeansConfig::default()).is_err());
        let two = [0.1, 0.9, 0.1, 0.9];
        assert!(kmeans_fit(&two, 2, &KmeansConfig::default()).is_err());
        assert!(kmeans_fit(&two, 1, &KmeansConfig::default()).is_ok());
    }

    #[test]
    fn levels_are_strictly_increasing_across_seeds() {
        let samples = gaussian_samples(5000, 7);
        for seed in 0..5 {
            let cfg = KmeansConfig {
                seed,
                ..KmeansConfig::default()
            };
            let cb = kmeans_fit(&samples, 5, &cfg).unwrap();
            assert!(cb.levels().windows(2).all(|p| p[1] > p[0]));
        }
    }

    #[test]
    fn quantize_ties_break_to_the_lower_level() {
        assert!(ScalarCodebook::from_levels(vec![-1.0, 0.0, 1.0], 0).is_err());
        assert!(ScalarCodebook::from_levels(vec![0.5, -0.5], 1).is_err());
        let cb = ScalarCodebook::from_levels(vec![-0.5, 0.5], 1).unwrap();
        let (idx, level) = cb.quantize(0.0);
        assert_eq!(idx, 0);
        assert_eq!(level, -0.5);
        assert_eq!(cb.quantize(0.0001).0, 1);
        assert_eq!(cb.quantize(-3.0).0, 0);
        assert_eq!(cb.quantize(3.0).0, 1);
    }

    #[test]
    fn quantization_is_idempotent() {
        let samples = gaussian_samples(4000, 9);
        let cb = kmeans_fit(&samples, 3, &KmeansConfig::default()).unwrap();
        for &x in samples.iter().take(200) {
            let (i, l) = cb.quantize(x);
            let (i2, l2) = cb.quantize(l);
            assert_eq!(i, i2);
            assert_eq!(l, l2);
        }
    }

    #[test]
    fn fit_is_deterministic_in_the_seed() {
        let samples = gaussian_samples(3000, 11);
        let a = kmeans_fit(&samples, 4, &KmeansConfig::default()).unwrap();
        let b = kmeans_fit(&samples, 4, &KmeansConfig::default()).unwrap();
        assert_eq!(a, b);
        let other = kmeans_fit(
            &samples,
            4,
            &KmeansConfig {
                seed: 99,
                ..KmeansConfig::default()
            },
        )
        .unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn held_out_distortion_stays_close_to_training_distortion() {
        let train = gaussian_samples(30000, 13);
        let held = gaussian_samples(30000, 14);
        let cb = kmeans_fit(&train, 4, &KmeansConfig::default()).unwrap();
        let dt = distortion(&cb, &train);
        let dh = distortion(&cb, &held);
        assert!(
            (dh - dt).abs() / dt < 0.10,
            "train {dt} vs held-out {dh} distortion"
        );
    }

    #[test]
    fn componentwise_nearest_matches_product_codebook_brute_force() {
        let mut r = rng(17);
        let latents = Array2::from_shape_fn((4000, 3), |_| {
            let g: f64 = StandardNormal.sample(&mut r);
            (g * 0.7).tanh()
        });
        let q = LatentQuantizer::fit(latents.view(), &[2, 2, 2], &KmeansConfig::default())
            .unwrap();
        let mut probe = rng(18);
        for _ in 0..300 {
            let z = [
                probe.gen::<f64>() * 2.0 - 1.0,
                probe.gen::<f64>() * 2.0 - 1.0,
                probe.gen::<f64>() * 2.0 - 1.0,
            ];
            let (zq, _) = q.quantize(z);
            let mut best = f64::INFINITY;
            let mut best_triple = [0.0; 3];
            for &a in q.components()[0].levels() {
                for &b in q.components()[1].levels() {
                    for &c in q.components()[2].levels() {
                        let d = (z[0] - a).powi(2) + (z[1] - b).powi(2) + (z[2] - c).powi(2);
                        if d < best {
                            best = d;
                            best_triple = [a, b, c];
                        }
                    }
                }
            }
            let own = (z[0] - zq[0]).powi(2) + (z[1] - zq[1]).powi(2) + (z[2] - zq[2]).powi(2);
            assert!((own - best).abs() < 1e-15, "{zq:?} vs {best_triple:?}");
        }
    }

    #[test]
    fn latent_quantizer_round_trips_through_its_file_format() {
        let mut r = rng(21);
        let latents = Array2::from_shape_fn((2000, 3), |_| {
            let g: f64 = StandardNormal.sample(&mut r);
            (g * 0.6).tanh()
        });
        let q = LatentQuantizer::fit(latents.view(), &[3, 2, 3], &KmeansConfig::default())
            .unwrap();
        assert_eq!(q.total_bits(), 8);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("codebook.txt");
        q.save(&path).unwrap();
        let back = LatentQuantizer::load(&path).unwrap();
        assert_eq!(q, back);
    }

    #[test]
    fn latent_file_parser_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "[component 1]\n0.5\nnot-a-number\n").unwrap();
        match LatentQuantizer::load(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected a parse error, got {other:?}"),
        }
        std::fs::write(&path, "0.5\n").unwrap();
        assert!(LatentQuantizer::load(&path).is_err());
        std::fs::write(&path, "[component 2]\n0.5\n").unwrap();
        assert!(LatentQuantizer::load(&path).is_err());
    }

    #[test]
    fn fitted_latent_levels_stay_inside_the_latent_range() {
        let mut r = rng(23);
        let latents = Array2::from_shape_fn((3000, 3), |_| {
            let g: f64 = StandardNormal.sample(&mut r);
            (g * 2.0).tanh()
        });
        let q = LatentQuantizer::fit(latents.view(), &[4, 4, 4], &KmeansConfig::default())
            .unwrap();
        for comp in q.components() {
            assert!(comp.levels().iter().all(|l| l.abs() <= 1.0));
        }
    }

    #[test]
    fn quantize_rows_matches_scalar_quantize() {
        let mut r = rng(25);
        let latents = Array2::from_shape_fn((500, 3), |_| {
            let g: f64 = StandardNormal.sample(&mut r);
            (g * 0.5).tanh()
        });
        let q = LatentQuantizer::fit(latents.view(), &[2, 3, 2], &KmeansConfig::default())
            .unwrap();
        let mut rows = latents.clone();
        q.quantize_rows(&mut rows);
        for i in 0..rows.nrows() {
            let (zq, _) = q.quantize([latents[(i, 0)], latents[(i, 1)], latents[(i, 2)]]);
            assert_eq!(rows[(i, 0)], zq[0]);
            assert_eq!(rows[(i, 1)], zq[1]);
            assert_eq!(rows[(i, 2)], zq[2]);
        }
    }
}
