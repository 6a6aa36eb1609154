//! Page-backed storage that is reserved without being written.
//!
//! On Linux the memory comes straight from an anonymous private mapping, so
//! no page is faulted in (and therefore placed on a memory node) until the
//! first store to it. Elsewhere it falls back to a zeroed heap allocation.

use std::marker::PhantomData;
use std::mem::{align_of, size_of};
use std::ptr::NonNull;

use crate::error::{Error, Result};

pub(crate) struct SiteBuffer<E> {
    ptr: NonNull<E>,
    len: usize,
    #[cfg(target_os = "linux")]
    mapped: usize,
    #[cfg(not(target_os = "linux"))]
    layout: std::alloc::Layout,
    _owns: PhantomData<E>,
}

// The buffer owns plain data; sharing follows the element type.
unsafe impl<E: Send> Send for SiteBuffer<E> {}
unsafe impl<E: Sync> Sync for SiteBuffer<E> {}

impl<E: Copy> SiteBuffer<E> {
    /// Reserves room for `len` elements without touching it.
    ///
    /// # Safety
    ///
    /// The all-zero bit pattern must be a valid `E`.
    pub(crate) unsafe fn reserve(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::param("buffer length must be positive"));
        }
        let bytes = len.checked_mul(size_of::<E>()).ok_or_else(|| Error::Resource {
            bytes: usize::MAX,
            reason: "size overflows the address space".into(),
        })?;
        Self::map(len, bytes)
    }

    #[cfg(target_os = "linux")]
    unsafe fn map(len: usize, bytes: usize) -> Result<Self> {
        let page = page_size();
        debug_assert!(align_of::<E>() <= page);
        let mapped = bytes.div_ceil(page) * page;
        let ptr = libc::mmap(
            std::ptr::null_mut(),
            mapped,
            libc::PROT_READ | libc::PROT_WRITE,
            libc::MAP_PRIVATE | libc::MAP_ANONYMOUS | libc::MAP_NORESERVE,
            -1,
            0,
        );
        if ptr == libc::MAP_FAILED {
            return Err(Error::Resource {
                bytes,
                reason: std::io::Error::last_os_error().to_string(),
            });
        }
        Ok(SiteBuffer {
            ptr: NonNull::new_unchecked(ptr.cast()),
            len,
            mapped,
            _owns: PhantomData,
        })
    }

    #[cfg(not(target_os = "linux"))]
    unsafe fn map(len: usize, bytes: usize) -> Result<Self> {
        let layout = std::alloc::Layout::from_size_align(bytes, align_of::<E>().max(64))
            .map_err(|e| Error::Resource { bytes, reason: e.to_string() })?;
        let ptr = std::alloc::alloc_zeroed(layout);
        let ptr = NonNull::new(ptr.cast()).ok_or_else(|| Error::Resource {
            bytes,
            reason: "allocator returned null".into(),
        })?;
        Ok(SiteBuffer { ptr, len, layout, _owns: PhantomData })
    }
}

impl<E> SiteBuffer<E> {
    pub(crate) fn len(&self) -> usize {
        self.len
    }

    pub(crate) fn byte_len(&self) -> usize {
        self.len * size_of::<E>()
    }

    pub(crate) fn as_slice(&self) -> &[E] {
        unsafe { std::slice::from_raw_parts(self.ptr.as_ptr(), self.len) }
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [E] {
        unsafe { std::slice::from_raw_parts_mut(self.ptr.as_ptr(), self.len) }
    }

    pub(crate) fn as_ptr(&self) -> *const E {
        self.ptr.as_ptr()
    }

    pub(crate) fn as_mut_ptr(&mut self) -> *mut E {
        self.ptr.as_ptr()
    }
}

impl<E> Drop for SiteBuffer<E> {
    fn drop(&mut self) {
        #[cfg(target_os = "linux")]
        unsafe {
            libc::munmap(self.ptr.as_ptr().cast(), self.mapped);
        }
        #[cfg(not(target_os = "linux"))]
        unsafe {
            std::alloc::dealloc(self.ptr.as_ptr().cast(), self.layout);
        }
    }
}

#[cfg(target_os = "linux")]
pub(crate) fn page_size() -> usize {
    let p = unsafe { libc::sysconf(libc::_SC_PAGESIZE) };
    if p > 0 {
        p as usize
    } else {
        4096
    }
}

/// Raw view of a buffer through which disjoint index sets are written from
/// several threads at once.
pub(crate) struct SharedMut<E> {
    ptr: *mut E,
    len: usize,
}

impl<E> Clone for SharedMut<E> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<E> Copy for SharedMut<E> {}

unsafe impl<E: Send> Send for SharedMut<E> {}
unsafe impl<E: Send> Sync for SharedMut<E> {}

impl<E> SharedMut<E> {
    pub(crate) fn new(ptr: *mut E, len: usize) -> Self {
        SharedMut { ptr, len }
    }

    /// # Safety
    ///
    /// `i < len`, and no other thread reads or writes the same location
    /// while the returned pointer is in use.
    #[inline(always)]
    pub(crate) unsafe fn at(&self, i: usize) -> *mut E {
        debug_assert!(i < self.len);
        self.ptr.add(i)
    }
}
