use crate::par::{self, Execution};
use crate::sparse::OperatorMatrix;
use crate::C64;

use super::lattice::{stagger, Boundary};
use super::sector::VIRTUAL_LINK;
use super::{Basis, ModelError, ModelKind, ModelParams};

/// The quench Hamiltonian of `params.kind` on `basis`.
///
/// * Z2: `-J sum (phi^dag tau^z phi + h.c.) + mu sum (-1)^j n_j - h sum tau^x`
/// * free fermion: the hopping term alone
/// * U(1) QLM: `-J sum (phi^dag_j s^+ phi_{j+1} + h.c.) + delta sum_{even} s^z`
///
/// The matter fermions are encoded as hard-core bosons; with the link
/// operator sitting between the two matter sites of every bond no string
/// survives, so all hopping amplitudes are `-J`. A periodic chain closes the
/// ring in the encoded language.
pub fn build_hamiltonian(params: &ModelParams, basis: &Basis) -> Result<OperatorMatrix, ModelError> {
    build_hamiltonian_with(params, basis, Execution::default())
}

pub fn build_hamiltonian_with(
    params: &ModelParams,
    basis: &Basis,
    exec: Execution,
) -> Result<OperatorMatrix, ModelError> {
    params.validate()?;
    if basis.kind() != params.kind {
        return Err(ModelError::KindMismatch { basis: basis.kind(), expected: params.kind });
    }
    let lattice = *basis.lattice();
    let bonds = lattice.bonds();
    let bonds: Vec<_> = if params.kind.has_links() {
        bonds
    } else if lattice.boundary == Boundary::Open {
        (0..lattice.n_matter - 1).map(|i| (i, i, i + 1)).collect()
    } else {
        (0..lattice.n_matter).map(|i| (i, i, (i + 1) % lattice.n_matter)).collect()
    };
    let hop = C64::new(-params.j, 0.0);
    let rows = par::map_range(exec, basis.len(), |idx| {
        let key = basis.keys()[idx];
        let mut row = Vec::with_capacity(bonds.len() + 1);
        let diag = diagonal_energy(params, basis, key);
        if diag != 0.0 {
            row.push((idx, C64::new(diag, 0.0)));
        }
        for &(k, a, b) in &bonds {
            let (na, nb) = (basis.occupation(key, a), basis.occupation(key, b));
            if na == nb {
                continue;
            }
            let moved = basis.toggle_site(basis.toggle_site(key, a), b);
            let image = match params.kind {
                ModelKind::FreeFermion => moved,
                ModelKind::Z2Lgt => basis.flip_link(moved, k),
                ModelKind::U1Qlm => {
                    // b -> a raises the link from -1 to +1, a -> b lowers it
                    let sigma = basis.link_sign(key, k);
                    let allowed = if nb == 1 { sigma == -1 } else { sigma == 1 };
                    if !allowed {
                        continue;
                    }
                    basis.flip_link(moved, k)
                }
            };
            match basis.index_of_key(image) {
                Some(col) => row.push((col, hop)),
                None => return Err(ModelError::BasisNotClosed(key)),
            }
        }
        Ok(row)
    });
    Ok(OperatorMatrix::from_rows(rows.into_iter().collect::<Result<_, _>>()?))
}

/// `<key| H_mu + H_h + H_delta |key>`.
fn diagonal_energy(params: &ModelParams, basis: &Basis, key: u64) -> f64 {
    let l = basis.lattice().n_matter;
    let mu = params.effective_mu();
    let mut e = 0.0;
    if mu != 0.0 {
        e += mu * (0..l).map(|i| stagger(i) * basis.occupation(key, i) as f64).sum::<f64>();
    }
    let h = params.effective_h();
    if h != 0.0 {
        e -= h * (0..basis.n_links()).map(|k| basis.link_sign(key, k) as f64).sum::<f64>();
    }
    let delta = params.effective_delta();
    if delta != 0.0 {
        e += delta * (0..basis.n_links()).step_by(2).map(|k| 0.5 * basis.link_sign(key, k) as f64).sum::<f64>();
    }
    e
}

fn diagonal(basis: &Basis, f: impl Fn(u64) -> f64) -> OperatorMatrix {
    OperatorMatrix::from_diagonal(&basis.keys().iter().map(|&k| f(k)).collect::<Vec<_>>())
}

fn check_site(basis: &Basis, i: usize) -> Result<(), ModelError> {
    let n_matter = basis.lattice().n_matter;
    if i >= n_matter {
        return Err(ModelError::SiteOutOfRange { site: i, n_matter });
    }
    Ok(())
}

fn check_links(basis: &Basis) -> Result<(), ModelError> {
    if basis.n_links() == 0 {
        return Err(ModelError::KindMismatch { basis: basis.kind(), expected: ModelKind::Z2Lgt });
    }
    Ok(())
}

fn neighbour_signs(basis: &Basis, key: u64, i: usize) -> (f64, f64) {
    let lat = basis.lattice();
    let sign = |k: Option<usize>| k.map_or(VIRTUAL_LINK, |k| basis.link_sign(key, k)) as f64;
    (sign(lat.left_link(i)), sign(lat.right_link(i)))
}

/// `G_j = exp(i pi n_j) tau^x_{j-1,j} tau^x_{j,j+1}` on matter site `i`.
///
/// Open chains use the frozen virtual links at the ends.
pub fn gauss_operator_z2(basis: &Basis, i: usize) -> Result<OperatorMatrix, ModelError> {
    check_site(basis, i)?;
    check_links(basis)?;
    Ok(diagonal(basis, |key| {
        let (l, r) = neighbour_signs(basis, key, i);
        let parity = if basis.occupation(key, i) == 1 { -1.0 } else { 1.0 };
        parity * l * r
    }))
}

/// `G_j = n_j - b_j - (s^z_{j,j+1} - s^z_{j-1,j})` on matter site `i`.
pub fn gauss_operator_u1(basis: &Basis, i: usize) -> Result<OperatorMatrix, ModelError> {
    check_site(basis, i)?;
    check_links(basis)?;
    let background = (i % 2 == 1) as u8 as f64;
    Ok(diagonal(basis, |key| {
        let (l, r) = neighbour_signs(basis, key, i);
        basis.occupation(key, i) as f64 - background - 0.5 * (r - l)
    }))
}

/// Total particle number.
pub fn number_operator(basis: &Basis) -> OperatorMatrix {
    let l = basis.lattice().n_matter;
    diagonal(basis, |key| (0..l).map(|i| basis.occupation(key, i) as f64).sum())
}

/// `n_j` on matter site `i`.
pub fn site_number_operator(basis: &Basis, i: usize) -> Result<OperatorMatrix, ModelError> {
    check_site(basis, i)?;
    Ok(diagonal(basis, |key| basis.occupation(key, i) as f64))
}

/// The link sign `sigma_k` (`tau^x` for Z2, `2 s^z` for the link model).
pub fn link_sign_operator(basis: &Basis, k: usize) -> Result<OperatorMatrix, ModelError> {
    check_links(basis)?;
    if k >= basis.n_links() {
        return Err(ModelError::ConfigMismatch(format!("link {k} of {}", basis.n_links())));
    }
    Ok(diagonal(basis, |key| basis.link_sign(key, k) as f64))
}

/// The diagonal energy that the resonant dynamics conserves.
///
/// For the Z2 theory this is `H_mu + H_h` itself. For the link model it is
/// the image of `sum (-1)^j n_j - sum tau^x` under the link mapping, i.e.
/// `sum (-1)^j n_j - sum (-1)^j 2 s^z_{j,j+1}`, which commutes with the link
/// model hopping exactly.
pub fn resonance_energy_operator(params: &ModelParams, basis: &Basis) -> OperatorMatrix {
    let l = basis.lattice().n_matter;
    match basis.kind() {
        ModelKind::U1Qlm => diagonal(basis, |key| {
            let matter: f64 = (0..l).map(|i| stagger(i) * basis.occupation(key, i) as f64).sum();
            let links: f64 = (0..basis.n_links()).map(|k| stagger(k) * basis.link_sign(key, k) as f64).sum();
            matter - links
        }),
        _ => {
            let p = ModelParams { delta: 0.0, ..*params };
            diagonal(basis, |key| diagonal_energy(&p, basis, key))
        }
    }
}
