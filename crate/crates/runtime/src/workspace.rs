/// Scratch buffer shared by every convolution for its im2col expansion.
///
/// The buffer grows to the largest request that fits under the cap. A layer
/// whose request exceeds the cap falls back to direct loops.
#[derive(Debug)]
pub struct Workspace<T> {
    cap_bytes: Option<usize>,
    buf: Vec<T>,
    peak_bytes: usize,
}

impl<T: crate::Element> Workspace<T> {
    /// `cap_bytes = None` means unlimited.
    pub fn new(cap_bytes: Option<usize>) -> Self {
        Workspace {
            cap_bytes,
            buf: Vec::new(),
            peak_bytes: 0,
        }
    }

    pub fn cap_bytes(&self) -> Option<usize> {
        self.cap_bytes
    }

    pub fn fits(&self, elems: usize) -> bool {
        self.cap_bytes.is_none_or(|cap| elems * T::BYTES <= cap)
    }

    /// A scratch slice of `elems` elements, or `None` when over the cap.
    pub fn get(&mut self, elems: usize) -> Option<&mut [T]> {
        if !self.fits(elems) {
            return None;
        }
        if self.buf.len() < elems {
            self.buf.resize(elems, T::zero());
            self.peak_bytes = self.peak_bytes.max(elems * T::BYTES);
        }
        Some(&mut self.buf[..elems])
    }

    pub fn allocated_bytes(&self) -> usize {
        self.peak_bytes
    }
}
