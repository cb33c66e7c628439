// General-purpose register primitives for the baseline arms.

#[cfg(target_arch = "x86_64")]
mod imp {
    use std::arch::asm;

    /// One `mov r15, reg`.
    #[inline(always)]
    pub fn store(value: u64) {
        unsafe {
            asm!("mov r15, {v}", v = in(reg) value, out("r15") _,
                 options(nomem, nostack, preserves_flags));
        }
    }

    /// One `mov reg, r15`, with `held` placed in r15 beforehand. The
    /// compiler keeps `held` in r15 across a loop, so each call costs a
    /// single move.
    #[inline(always)]
    pub fn load(held: u64) -> u64 {
        let out: u64;
        unsafe {
            asm!("mov {o}, r15", o = out(reg) out, in("r15") held,
                 options(nomem, nostack, preserves_flags));
        }
        out
    }

    /// Opaque identity on two pointers; keeps them in registers and stops
    /// the loop around it from being vectorized or hoisted.
    // The pointers are never dereferenced, only hidden from the optimizer.
    #[allow(clippy::pointers_in_nomem_asm_block)]
    #[inline(always)]
    pub fn pin<T>(a: &mut *const T, b: &mut *const T) {
        unsafe {
            asm!(
                "/* {0} {1} */",
                inout(reg) * a,
                inout(reg) * b,
                options(nomem, nostack, preserves_flags)
            );
        }
    }
}

#[cfg(not(target_arch = "x86_64"))]
mod imp {
    use std::hint::black_box;

    #[inline(always)]
    pub fn store(value: u64) {
        black_box(value);
    }

    #[inline(always)]
    pub fn load(held: u64) -> u64 {
        black_box(held)
    }

    #[inline(always)]
    pub fn pin<T>(a: &mut *const T, b: &mut *const T) {
        *a = black_box(*a);
        *b = black_box(*b);
    }
}

pub(crate) use imp::{load, pin, store};
