//! Brute-force oracles for the subtree algebra: every check enumerates the
//! subsets of a small tree and compares the evaluator against set
//! operations written out directly.

use std::collections::{BTreeMap, BTreeSet};

use contract_ledger::logic::{
    interpret_formula, pullback, pushforward_exists, pushforward_forall, Atom, ExplicitTree, Formula, Interpretation,
    Modal, Model, MonotoneMap, Path,
};
use rand::seq::SliceRandom;
use rand::Rng;

pub type Set = BTreeSet<Path>;

/// A random prefix-closed tree with exactly `n` paths, root included.
pub fn random_tree<R: Rng>(rng: &mut R, n: usize) -> ExplicitTree {
    let mut paths: Vec<Path> = vec![Vec::new()];
    while paths.len() < n {
        let mut p = paths.choose(rng).unwrap().clone();
        p.push(["a", "b", "c"].choose(rng).unwrap().to_string());
        if !paths.contains(&p) {
            paths.push(p);
        }
    }
    ExplicitTree::new(paths)
}

pub fn all_subsets(u: &[Path]) -> impl Iterator<Item = Set> + '_ {
    assert!(u.len() < 20, "subset enumeration is exponential");
    (0u32..1 << u.len()).map(move |mask| {
        u.iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, p)| p.clone())
            .collect()
    })
}

pub fn random_subset<R: Rng>(rng: &mut R, u: &[Path]) -> Set {
    u.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect()
}

/// A formula true exactly on the paths of `x`.
pub fn set_formula(x: &Set) -> Formula {
    Formula::any(x.iter().map(|p| Formula::atom(Atom::Zeta(p.clone()))))
}

fn is_prefix(a: &Path, b: &Path) -> bool {
    b.starts_with(a)
}

pub fn prefix_closure(x: &Set, u: &[Path]) -> Set {
    u.iter()
        .filter(|p| x.iter().any(|q| is_prefix(p, q)))
        .cloned()
        .collect()
}

pub fn largest_prefix_closed(x: &Set) -> Set {
    x.iter()
        .filter(|p| (0..=p.len()).all(|k| x.contains(&p[..k].to_vec())))
        .cloned()
        .collect()
}

pub fn prolongation_closure(x: &Set, u: &[Path]) -> Set {
    u.iter()
        .filter(|p| x.iter().any(|q| is_prefix(q, p)))
        .cloned()
        .collect()
}

pub fn largest_prolongation_closed(x: &Set, u: &[Path]) -> Set {
    x.iter()
        .filter(|p| u.iter().filter(|q| is_prefix(p, q)).all(|q| x.contains(q)))
        .cloned()
        .collect()
}

fn children<'a>(p: &'a Path, u: &'a [Path]) -> impl Iterator<Item = &'a Path> + 'a {
    u.iter().filter(move |q| q.len() == p.len() + 1 && is_prefix(p, q))
}

pub fn next_some(x: &Set, u: &[Path]) -> Set {
    u.iter()
        .filter(|p| children(p, u).any(|q| x.contains(q)))
        .cloned()
        .collect()
}

pub fn next_all(x: &Set, u: &[Path]) -> Set {
    u.iter()
        .filter(|p| children(p, u).all(|q| x.contains(q)))
        .cloned()
        .collect()
}

pub fn prev_some(x: &Set, u: &[Path]) -> Set {
    u.iter()
        .filter(|p| !p.is_empty() && x.contains(&p[..p.len() - 1].to_vec()))
        .cloned()
        .collect()
}

pub fn prev_all(x: &Set, u: &[Path]) -> Set {
    u.iter()
        .filter(|p| p.is_empty() || x.contains(&p[..p.len() - 1].to_vec()))
        .cloned()
        .collect()
}

pub fn complement(x: &Set, u: &[Path]) -> Set {
    u.iter().filter(|p| !x.contains(*p)).cloned().collect()
}

fn depth(u: &[Path]) -> usize {
    u.iter().map(Vec::len).max().unwrap_or(0)
}

pub fn eval_set(model: &Model, f: &Formula, u: &[Path]) -> Set {
    interpret_formula(model, f, depth(u)).unwrap().paths
}

/// Each modal operator against its closure characterisation, for every subset.
pub fn check_closures(tree: &ExplicitTree) -> Result<(), String> {
    let u: Vec<Path> = tree.paths().cloned().collect();
    let model = Model::from_tree(tree.clone());
    for x in all_subsets(&u) {
        let f = set_formula(&x);
        let expected: [(Modal, Set); 8] = [
            (Modal::SomeFuture, prefix_closure(&x, &u)),
            (Modal::AllPasts, largest_prefix_closed(&x)),
            (Modal::SomePast, prolongation_closure(&x, &u)),
            (Modal::AllFutures, largest_prolongation_closed(&x, &u)),
            (Modal::NextSome, next_some(&x, &u)),
            (Modal::NextAll, next_all(&x, &u)),
            (Modal::PrevSome, prev_some(&x, &u)),
            (Modal::PrevAll, prev_all(&x, &u)),
        ];
        for (m, want) in expected {
            let got = eval_set(&model, &Formula::modal(m, f.clone()), &u);
            if got != want {
                return Err(format!("{} on {x:?}: got {got:?}, want {want:?}", m.keyword()));
            }
        }
    }
    Ok(())
}

/// Boolean laws for every subset `x` against `samples` random partners.
pub fn check_boolean<R: Rng>(tree: &ExplicitTree, rng: &mut R, samples: usize) -> Result<(), String> {
    let u: Vec<Path> = tree.paths().cloned().collect();
    let model = Model::from_tree(tree.clone());
    let full: Set = u.iter().cloned().collect();
    for x in all_subsets(&u) {
        for _ in 0..samples {
            let y = random_subset(rng, &u);
            let z = random_subset(rng, &u);
            let (fx, fy, fz) = (set_formula(&x), set_formula(&y), set_formula(&z));
            let ev = |f: Formula| eval_set(&model, &f, &u);
            let not = |f: &Formula| Formula::negate(f.clone());
            let and = |a: &Formula, b: &Formula| Formula::and(a.clone(), b.clone());
            let or = |a: &Formula, b: &Formula| Formula::or(a.clone(), b.clone());
            let laws = [
                (
                    "and is intersection",
                    ev(and(&fx, &fy)),
                    x.intersection(&y).cloned().collect(),
                ),
                ("or is union", ev(or(&fx, &fy)), x.union(&y).cloned().collect()),
                ("not is complement", ev(not(&fx)), complement(&x, &u)),
                ("de morgan and", ev(not(&and(&fx, &fy))), ev(or(&not(&fx), &not(&fy)))),
                ("de morgan or", ev(not(&or(&fx, &fy))), ev(and(&not(&fx), &not(&fy)))),
                (
                    "distributivity",
                    ev(and(&fx, &or(&fy, &fz))),
                    ev(or(&and(&fx, &fy), &and(&fx, &fz))),
                ),
                ("excluded middle", ev(or(&fx, &not(&fx))), full.clone()),
                ("contradiction", ev(and(&fx, &not(&fx))), Set::new()),
                ("double negation", ev(not(&not(&fx))), x.clone()),
                (
                    "implication",
                    ev(Formula::implies(fx.clone(), fy.clone())),
                    ev(or(&not(&fx), &fy)),
                ),
            ];
            for (name, got, want) in laws {
                if got != want {
                    return Err(format!("{name} fails for x={x:?} y={y:?} z={z:?}"));
                }
            }
        }
    }
    Ok(())
}

/// A random prefix-preserving map from `dom` into `cod`: the root goes to
/// the root, and each child goes to its parent's image or one of that
/// image's children.
pub fn random_monotone<R: Rng>(rng: &mut R, dom: &ExplicitTree, cod: &ExplicitTree) -> BTreeMap<Path, Path> {
    let cod_paths: Vec<Path> = cod.paths().cloned().collect();
    let mut by_len: Vec<Path> = dom.paths().cloned().collect();
    by_len.sort_by_key(Vec::len);
    let mut table: BTreeMap<Path, Path> = BTreeMap::new();
    for p in by_len {
        let image = match p.split_last() {
            None => Vec::new(),
            Some((_, parent)) => {
                let base = table[parent].clone();
                let mut options: Vec<Path> = children(&base, &cod_paths).cloned().collect();
                options.push(base);
                options.choose(rng).unwrap().clone()
            }
        };
        table.insert(p, image);
    }
    table
}

fn interp(x: &Set) -> Interpretation {
    Interpretation::new(x.iter().cloned(), usize::MAX)
}

/// Both adjunctions and the preservation laws of pulling back.
pub fn check_galois<R: Rng>(
    rng: &mut R,
    dom: &ExplicitTree,
    cod: &ExplicitTree,
    table: BTreeMap<Path, Path>,
    samples: usize,
) -> Result<(), String> {
    let du: Vec<Path> = dom.paths().cloned().collect();
    let cu: Vec<Path> = cod.paths().cloned().collect();
    let mu = MonotoneMap::Table(table);
    for (i, p) in du.iter().enumerate() {
        for q in &du[i..] {
            let (a, b) = (mu.apply(p).unwrap(), mu.apply(q).unwrap());
            if is_prefix(p, q) && !is_prefix(&a, &b) {
                return Err(format!("map is not monotone at {p:?} <= {q:?}"));
            }
        }
    }
    let exists = |x: &Set| pushforward_exists(&mu, &interp(x)).unwrap().paths;
    let forall = |x: &Set| pushforward_forall(&mu, &interp(x), &du, &cu).unwrap().paths;
    let pull = |y: &Set| pullback(&mu, &interp(y), &du).unwrap().paths;
    for x in all_subsets(&du) {
        for _ in 0..samples {
            let y = random_subset(rng, &cu);
            if x.is_subset(&pull(&y)) != exists(&x).is_subset(&y) {
                return Err(format!("exists -| pullback fails for x={x:?} y={y:?}"));
            }
            if pull(&y).is_subset(&x) != y.is_subset(&forall(&x)) {
                return Err(format!("pullback -| forall fails for x={x:?} y={y:?}"));
            }
            let y2 = random_subset(rng, &cu);
            let inter: Set = y.intersection(&y2).cloned().collect();
            let union: Set = y.union(&y2).cloned().collect();
            let pi: Set = pull(&y).intersection(&pull(&y2)).cloned().collect();
            let pu: Set = pull(&y).union(&pull(&y2)).cloned().collect();
            if pull(&inter) != pi || pull(&union) != pu {
                return Err(format!(
                    "pullback does not preserve meets or joins at y={y:?} y2={y2:?}"
                ));
            }
            if pull(&complement(&y, &cu)) != complement(&pull(&y), &du) {
                return Err(format!("pullback does not preserve complement at y={y:?}"));
            }
        }
    }
    Ok(())
}
