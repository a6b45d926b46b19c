use riskstage::util::{SplitMix64, UnionFind};

#[test]
fn splitmix_matches_the_published_seed_zero_stream() {
    // First three outputs of the SplitMix64 reference implementation for
    // seed 0; any change here silently breaks every recorded seed.
    let mut rng = SplitMix64::new(0);
    assert_eq!(rng.next_u64(), 0xE220_A839_7B1D_CDAF);
    assert_eq!(rng.next_u64(), 0x6E78_9E6A_A1B9_65F4);
    assert_eq!(rng.next_u64(), 0x06C4_5D18_8009_454F);
}

#[test]
fn identical_seeds_replay_the_same_stream() {
    let mut a = SplitMix64::new(0xDEADBEEF);
    let mut b = SplitMix64::new(0xDEADBEEF);
    for _ in 0..100 {
        assert_eq!(a.next_u64(), b.next_u64());
    }
    let mut c = SplitMix64::new(0xDEADBEF0);
    assert_ne!(a.next_u64(), c.next_u64());
}

#[test]
fn unit_floats_stay_in_the_half_open_interval() {
    let mut rng = SplitMix64::new(7);
    for _ in 0..1000 {
        let u = rng.next_f64();
        assert!((0.0..1.0).contains(&u));
    }
}

#[test]
fn bernoulli_always_consumes_one_draw() {
    // Degenerate probabilities must not short-circuit the stream, otherwise
    // recorded seeds stop replaying when a parameter hits 0 or 1.
    let mut never = SplitMix64::new(42);
    let mut always = SplitMix64::new(42);
    let mut reference = SplitMix64::new(42);
    for _ in 0..50 {
        assert!(!never.bernoulli(0.0));
        assert!(always.bernoulli(1.0));
        reference.next_u64();
    }
    let (n, a, r) = (never.next_u64(), always.next_u64(), reference.next_u64());
    assert_eq!(n, a);
    assert_eq!(a, r);
}

#[test]
fn integer_draws_cover_their_inclusive_range() {
    let mut rng = SplitMix64::new(3);
    let mut seen = [false; 5];
    for _ in 0..500 {
        let v = rng.int_in(10, 14);
        assert!((10..=14).contains(&v));
        seen[(v - 10) as usize] = true;
    }
    assert!(seen.iter().all(|&s| s), "all five values should appear");
    // Degenerate range.
    for _ in 0..10 {
        assert_eq!(rng.int_in(6, 6), 6);
    }
    // index(len) stays below len and reaches every slot.
    let mut hits = [false; 3];
    for _ in 0..200 {
        hits[rng.index(3)] = true;
    }
    assert!(hits.iter().all(|&h| h));
}

#[test]
fn union_find_tracks_components() {
    let mut uf = UnionFind::new(6);
    assert_eq!(uf.components(), 6);
    assert!(!uf.connected(0, 1));
    assert!(uf.union(0, 1));
    assert!(uf.union(2, 3));
    assert!(uf.union(1, 2));
    assert_eq!(uf.components(), 3);
    assert!(uf.connected(0, 3));
    // Joining an already-connected pair reports false and changes nothing.
    assert!(!uf.union(0, 3));
    assert_eq!(uf.components(), 3);
    assert!(uf.union(4, 5));
    assert!(uf.union(0, 4));
    assert_eq!(uf.components(), 1);
    for v in 0..6 {
        assert!(uf.connected(0, v));
    }
    // find is stable once classes are merged.
    let root = uf.find(5);
    assert_eq!(uf.find(5), root);
    assert_eq!(uf.find(0), root);
}
