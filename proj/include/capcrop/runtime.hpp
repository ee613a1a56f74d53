#pragma once

namespace capcrop {

// Keeps freed crop-sized buffers (~1 MB each, several per objective
// evaluation) in the heap instead of returning them to the kernel, which
// otherwise costs a page-fault storm per evaluation. glibc only; a no-op
// elsewhere. Meant for executables, the library never calls it.
void tune_allocator();

}  // namespace capcrop
