//! MovieLens ratings → item features and a hidden parameter.
//!
//! Pipeline: keep the most-rated movies and the most active users, split
//! the users into a feature group and a target group with a seeded shuffle,
//! take a truncated SVD of the feature group's movie × user rating matrix,
//! transform the resulting movie vectors, then fit the parameter by least
//! squares against the target group's mean ratings.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{feature_transform, ClickModel, ItemSet, Theta};
use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, least_squares};

const HEADER: &str = "userId,movieId,rating,timestamp";
const SVD_TOLERANCE: f64 = 1e-10;
const SVD_MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: u64,
    pub movie: u64,
    pub rating: f64,
    pub timestamp: i64,
}

/// Parses `userId,movieId,rating,timestamp` lines. The header line is
/// optional; ratings must lie in `[0.5, 5.0]`.
pub fn parse_ratings(reader: impl BufRead) -> Result<Vec<Rating>> {
    let mut out = Vec::new();
    let mut seen_any = false;
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if !seen_any {
            seen_any = true;
            if line == HEADER {
                continue;
            }
        }
        out.push(parse_line(line, line_no)?);
    }
    if out.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no ratings found".into(),
        });
    }
    Ok(out)
}

fn parse_line(line: &str, line_no: usize) -> Result<Rating> {
    let err = |message: String| Error::Parse {
        line: line_no,
        message,
    };
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(err(format!("expected 4 fields, found {}", fields.len())));
    }
    let user = fields[0]
        .parse()
        .map_err(|_| err(format!("bad userId {:?}", fields[0])))?;
    let movie = fields[1]
        .parse()
        .map_err(|_| err(format!("bad movieId {:?}", fields[1])))?;
    let rating: f64 = fields[2]
        .parse()
        .map_err(|_| err(format!("bad rating {:?}", fields[2])))?;
    if !(0.5..=5.0).contains(&rating) {
        return Err(err(format!("rating {rating} outside [0.5, 5.0]")));
    }
    let timestamp = fields[3]
        .parse()
        .map_err(|_| err(format!("bad timestamp {:?}", fields[3])))?;
    Ok(Rating {
        user,
        movie,
        rating,
        timestamp,
    })
}

#[derive(Debug, Clone)]
pub struct MovieLensConfig {
    pub n_movies: usize,
    pub dim: usize,
    pub feature_users: usize,
    pub target_users: usize,
    pub split_seed: u64,
}

impl MovieLensConfig {
    pub fn new(n_movies: usize, dim: usize, split_seed: u64) -> Self {
        Self {
            n_movies,
            dim,
            feature_users: 100,
            target_users: 1000,
            split_seed,
        }
    }
}

/// Rank-`k` truncated SVD `A ≈ U diag(σ) Vᵀ`.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
}

impl TruncatedSvd {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let s = DMatrix::from_diagonal(&DVector::from_vec(self.sigma.clone()));
        &self.u * s * self.v.transpose()
    }
}

/// Truncated SVD by power iteration on `AᵀA` with Gram–Schmidt deflation.
pub fn truncated_svd(a: &DMatrix<f64>, rank: usize) -> Result<TruncatedSvd> {
    let (m, n) = a.shape();
    if rank == 0 || rank > m.min(n) {
        return invalid(format!("rank {rank} impossible for a {m}x{n} matrix"));
    }
    let gram = a.transpose() * a;
    let mut vs: Vec<DVector<f64>> = Vec::with_capacity(rank);
    let mut sigma = Vec::with_capacity(rank);
    for k in 0..rank {
        // Deterministic, generic start vector.
        let mut v = DVector::from_fn(n, |j, _| {
            1.0 + ((j + 7 * k) as f64 * 0.618_033_988_7).fract()
        });
        orthogonalise(&mut v, &vs);
        if v.norm() == 0.0 {
            return Err(Error::Degenerate(
                "power iteration start vector vanished".into(),
            ));
        }
        v /= v.norm();
        for _ in 0..SVD_MAX_ITERATIONS {
            let mut next = &gram * &v;
            orthogonalise(&mut next, &vs);
            let norm = next.norm();
            if norm == 0.0 {
                break;
            }
            next /= norm;
            let diff = (&next - &v).norm();
            v = next;
            if diff < SVD_TOLERANCE {
                break;
            }
        }
        let av = a * &v;
        sigma.push(av.norm());
        vs.push(v);
    }
    let mut u = DMatrix::zeros(m, rank);
    let mut vmat = DMatrix::zeros(n, rank);
    for k in 0..rank {
        vmat.set_column(k, &vs[k]);
        if sigma[k] > 0.0 {
            u.set_column(k, &((a * &vs[k]) / sigma[k]));
        }
    }
    Ok(TruncatedSvd { u, sigma, v: vmat })
}

fn orthogonalise(v: &mut DVector<f64>, basis: &[DVector<f64>]) {
    for b in basis {
        let p = v.dot(b);
        *v -= b * p;
    }
}

fn top_by_count(counts: &HashMap<u64, usize>, n: usize) -> Vec<u64> {
    let mut ids: Vec<(u64, usize)> = counts.iter().map(|(&k, &c)| (k, c)).collect();
    ids.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ids.into_iter().take(n).map(|(k, _)| k).collect()
}

/// Builds a document-based environment description from a ratings file.
pub fn movielens_features(
    path: impl AsRef<Path>,
    config: &MovieLensConfig,
) -> Result<(ItemSet, Theta, ClickModel)> {
    let file = std::fs::File::open(path)?;
    let ratings = parse_ratings(std::io::BufReader::new(file))?;
    features_from_ratings(&ratings, config)
}

pub fn features_from_ratings(
    ratings: &[Rating],
    config: &MovieLensConfig,
) -> Result<(ItemSet, Theta, ClickModel)> {
    if config.dim < 2 {
        return invalid("feature dimension must be at least 2");
    }
    let mut movie_counts: HashMap<u64, usize> = HashMap::new();
    let mut user_counts: HashMap<u64, usize> = HashMap::new();
    for r in ratings {
        *movie_counts.entry(r.movie).or_default() += 1;
        *user_counts.entry(r.user).or_default() += 1;
    }
    let n_users = config.feature_users + config.target_users;
    if movie_counts.len() < config.n_movies {
        return invalid(format!(
            "requested {} movies but the file has {}",
            config.n_movies,
            movie_counts.len()
        ));
    }
    if user_counts.len() < n_users {
        return invalid(format!(
            "requested {n_users} users but the file has {}",
            user_counts.len()
        ));
    }
    let movies = top_by_count(&movie_counts, config.n_movies);
    let mut users = top_by_count(&user_counts, n_users);
    users.sort_unstable();
    users.shuffle(&mut ChaCha8Rng::seed_from_u64(config.split_seed));
    let (feature_users, target_users) = users.split_at(config.feature_users);

    let movie_row: HashMap<u64, usize> = movies.iter().enumerate().map(|(i, &m)| (m, i)).collect();
    let feature_col: HashMap<u64, usize> = feature_users
        .iter()
        .enumerate()
        .map(|(i, &u)| (u, i))
        .collect();
    let is_target: std::collections::HashSet<u64> = target_users.iter().copied().collect();

    let mut matrix = DMatrix::zeros(movies.len(), feature_users.len());
    let mut target_sum = vec![0.0; movies.len()];
    let mut target_n = vec![0usize; movies.len()];
    for r in ratings {
        let Some(&row) = movie_row.get(&r.movie) else {
            continue;
        };
        if let Some(&col) = feature_col.get(&r.user) {
            matrix[(row, col)] = r.rating;
        } else if is_target.contains(&r.user) {
            target_sum[row] += r.rating;
            target_n[row] += 1;
        }
    }

    let svd = truncated_svd(&matrix, config.dim - 1)?;
    let mut vectors = Vec::with_capacity(movies.len());
    for (row, movie) in movies.iter().enumerate() {
        let raw: Vec<f64> = (0..config.dim - 1)
            .map(|k| svd.u[(row, k)] * svd.sigma[k])
            .collect();
        vectors.push(feature_transform(&raw).map_err(|_| {
            Error::Degenerate(format!(
                "movie {} has no ratings from the feature users",
                movie
            ))
        })?);
    }

    let data: Vec<(&[f64], f64)> = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mean = if target_n[i] > 0 {
                target_sum[i] / target_n[i] as f64
            } else {
                0.0
            };
            (v.as_slice(), mean / 5.0)
        })
        .collect();
    let theta = fit_into_unit_interval(&vectors, least_squares(&data)?);
    Ok((
        ItemSet::new(vectors)?,
        Theta(theta),
        ClickModel::DocumentBased,
    ))
}

/// Affinely rescales `θ` so that every `⟨a, θ⟩` lies in `[0, 1]`. Relies on
/// the last coordinate of every transformed item being `1/√2`.
fn fit_into_unit_interval(items: &[Vec<f64>], mut theta: Vec<f64>) -> Vec<f64> {
    let scores: Vec<f64> = items.iter().map(|a| dot(a, &theta)).collect();
    let lo = scores.iter().copied().fold(0.0_f64, f64::min);
    let hi = scores.iter().copied().fold(1.0_f64, f64::max);
    if lo < 0.0 || hi > 1.0 {
        let scale = 1.0 / (hi - lo);
        let last = theta.len() - 1;
        for t in theta.iter_mut() {
            *t *= scale;
        }
        theta[last] -= scale * lo * std::f64::consts::SQRT_2;
    }
    theta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::attractiveness;
    use std::io::Cursor;

    #[test]
    fn parses_with_and_without_header() {
        let text = "userId,movieId,rating,timestamp\n1,10,4.0,100\n2,10,3.5,101\n";
        let r = parse_ratings(Cursor::new(text)).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[1].rating, 3.5);
        let r = parse_ratings(Cursor::new("1,10,4.0,100\n")).unwrap();
        assert_eq!(r[0].movie, 10);
    }

    #[test]
    fn reports_line_numbers() {
        let text = "userId,movieId,rating,timestamp\n1,10,4.0,100\n2,ten,3.5,101\n";
        match parse_ratings(Cursor::new(text)) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match parse_ratings(Cursor::new("1,10,7.0,100\n")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        assert!(matches!(
            parse_ratings(Cursor::new("")),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_ratings(Cursor::new(format!("{HEADER}\n"))),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn rank_one_matrix_is_reproduced() {
        // 3 movies × 4 users, outer product of (1, 2, 3) and (1, 0.5, 2, 1).
        let a = DMatrix::from_fn(3, 4, |i, j| [1.0, 2.0, 3.0][i] * [1.0, 0.5, 2.0, 1.0][j]);
        let svd = truncated_svd(&a, 1).unwrap();
        assert!((svd.reconstruct() - &a).amax() < 1e-9);
    }

    #[test]
    fn svd_matches_library_singular_values() {
        let a = DMatrix::from_fn(6, 5, |i, j| ((i * 7 + j * 3) % 5) as f64 + 0.5 * i as f64);
        let ours = truncated_svd(&a, 3).unwrap();
        let mut lib: Vec<f64> = a
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .collect();
        lib.sort_by(|x, y| y.total_cmp(x));
        for k in 0..3 {
            assert!((ours.sigma[k] - lib[k]).abs() < 1e-6 * lib[0], "{k}");
        }
    }

    fn toy_ratings(n_users: u64, n_movies: u64) -> Vec<Rating> {
        let mut out = Vec::new();
        for u in 0..n_users {
            for m in 0..n_movies {
                if (u + m) % 3 != 0 || m < 2 {
                    let rating = 0.5 + ((u * 13 + m * 7) % 10) as f64 * 0.5;
                    out.push(Rating {
                        user: u,
                        movie: m,
                        rating,
                        timestamp: 0,
                    });
                }
            }
        }
        out
    }

    #[test]
    fn small_pipeline_produces_valid_environment() {
        let ratings = toy_ratings(30, 12);
        let config = MovieLensConfig {
            n_movies: 8,
            dim: 4,
            feature_users: 10,
            target_users: 20,
            split_seed: 5,
        };
        let (items, theta, model) = features_from_ratings(&ratings, &config).unwrap();
        assert_eq!(model, ClickModel::DocumentBased);
        assert_eq!(items.len(), 8);
        assert_eq!(items.dim(), 4);
        for a in items.iter() {
            let n: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-9);
            let al = attractiveness(a, &theta).unwrap();
            assert!((-1e-9..=1.0 + 1e-9).contains(&al), "{al}");
        }
    }

    #[test]
    fn too_few_users_or_movies() {
        let ratings = toy_ratings(5, 4);
        let config = MovieLensConfig {
            n_movies: 8,
            dim: 3,
            feature_users: 2,
            target_users: 2,
            split_seed: 0,
        };
        assert!(matches!(
            features_from_ratings(&ratings, &config),
            Err(Error::InvalidArgument(_))
        ));
        let config = MovieLensConfig {
            n_movies: 3,
            dim: 3,
            feature_users: 4,
            target_users: 4,
            split_seed: 0,
        };
        assert!(matches!(
            features_from_ratings(&ratings, &config),
            Err(Error::InvalidArgument(_))
        ));
    }
}
