use std::time::Instant;

fn clock_seconds(clock: libc::clockid_t) -> f64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(clock, &mut ts) };
    if rc != 0 {
        return f64::NAN;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

/// Process CPU time in seconds, summed over all threads.
pub fn process_cpu_seconds() -> f64 {
    clock_seconds(libc::CLOCK_PROCESS_CPUTIME_ID)
}

/// CPU time of the calling thread only.
pub fn thread_cpu_seconds() -> f64 {
    clock_seconds(libc::CLOCK_THREAD_CPUTIME_ID)
}

/// Runs `f` and returns its result with `(cpu_seconds, wall_seconds)`.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64, f64) {
    let cpu0 = process_cpu_seconds();
    let wall0 = Instant::now();
    let out = f();
    (out, process_cpu_seconds() - cpu0, wall0.elapsed().as_secs_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cpu_time_advances_with_work() {
        let (x, cpu, wall) = timed(|| (0..5_000_000u64).map(|k| (k as f64).sqrt()).sum::<f64>());
        assert!(x > 0.0);
        assert!(cpu > 0.0 && wall > 0.0);
    }
}
