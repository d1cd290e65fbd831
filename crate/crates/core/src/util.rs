//! Small helpers shared across modules.

/// Collapse whitespace runs to single spaces and trim the ends.
pub fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Case-folded, whitespace-collapsed form used as a dedup / lookup key.
pub fn norm_key(text: &str) -> String {
    normalize_ws(text).to_lowercase()
}

/// Run `f` over `0..n` with at most `cap` worker threads, collecting results
/// in index order. Completion order never affects the output.
pub fn bounded_map<T, F>(n: usize, cap: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    assert!(cap >= 1, "in-flight cap must be at least 1");
    if n == 0 {
        return Vec::new();
    }
    let workers = cap.min(n);
    if workers == 1 {
        return (0..n).map(f).collect();
    }

    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = f(i);
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}
