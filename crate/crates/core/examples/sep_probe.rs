use tight_ramsey::cleaning::separate_forest_with;
use tight_ramsey::expander::{generate_expander, GenParams};
use tight_ramsey::sforest::{SForest, STree};

fn mix(u: u32, v: u32) -> u32 {
    let mut x = ((u as u64) << 32) | v as u64;
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    (x ^ (x >> 31)) as u32
}

fn main() {
    for seed in [5u64, 9, 11, 3, 21] {
        let (g, _) = generate_expander(48, 0.25, seed, GenParams::default()).unwrap();
        let d1 = 15u32;
        let b1 = 1u32;
        let mut trees = Vec::new();
        for v in g.vertices() {
            let mut ball: Vec<u32> = g
                .ball(v, d1)
                .into_iter()
                .filter(|&u| u != v && g.dist(v, u) > b1)
                .collect();
            ball.sort_by_key(|&u| (g.dist(v, u), mix(u, v)));
            let nbrs: Vec<u32> = ball.into_iter().take(d1 as usize).collect();
            trees.push(STree::star(v, &nbrs).unwrap());
        }
        let f = SForest::new(g.n(), trees).unwrap();
        match separate_forest_with(&f, &g, b1, 2, seed, 200) {
            Ok(out) => {
                let min = out.trees().map(|t| t.min_arity().unwrap_or(99)).min();
                println!("seed {seed}: ok, min arity {min:?}");
            }
            Err(e) => println!("seed {seed}: FAILED: {e}"),
        }
    }
}
