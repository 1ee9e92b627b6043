//! Indexed max-heap over variable activities, MiniSat-style.

pub struct ActivityHeap {
    heap: Vec<u32>,
    pos: Vec<i32>, // by var; -1 when absent
}

impl ActivityHeap {
    pub fn new() -> ActivityHeap {
        ActivityHeap {
            heap: Vec::new(),
            pos: vec![-1; 1],
        }
    }

    fn ensure(&mut self, var: u32) {
        if self.pos.len() <= var as usize {
            self.pos.resize(var as usize + 1, -1);
        }
    }

    pub fn push(&mut self, var: u32, activity: &[f64]) {
        self.ensure(var);
        if self.pos[var as usize] >= 0 {
            return;
        }
        self.pos[var as usize] = self.heap.len() as i32;
        self.heap.push(var);
        self.sift_up(self.heap.len() - 1, activity);
    }

    pub fn pop(&mut self, activity: &[f64]) -> Option<u32> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().unwrap();
        self.pos[top as usize] = -1;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last as usize] = 0;
            self.sift_down(0, activity);
        }
        Some(top)
    }

    /// Restores order after `var`'s activity increased.
    pub fn update(&mut self, var: u32, activity: &[f64]) {
        self.ensure(var);
        let p = self.pos[var as usize];
        if p >= 0 {
            self.sift_up(p as usize, activity);
        }
    }

    fn sift_up(&mut self, mut i: usize, activity: &[f64]) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if activity[self.heap[i] as usize] <= activity[self.heap[parent] as usize] {
                break;
            }
            self.swap(i, parent);
            i = parent;
        }
    }

    fn sift_down(&mut self, mut i: usize, activity: &[f64]) {
        loop {
            let mut best = i;
            for child in [2 * i + 1, 2 * i + 2] {
                if child < self.heap.len()
                    && activity[self.heap[child] as usize] > activity[self.heap[best] as usize]
                {
                    best = child;
                }
            }
            if best == i {
                break;
            }
            self.swap(i, best);
            i = best;
        }
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.heap.swap(a, b);
        self.pos[self.heap[a] as usize] = a as i32;
        self.pos[self.heap[b] as usize] = b as i32;
    }
}
