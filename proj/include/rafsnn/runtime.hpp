#pragma once

#include <string>

namespace rafsnn {

// Keeps large freed blocks on the heap so per-step tensors reuse pages
// instead of faulting fresh ones. Idempotent.
void tune_allocator();

// For executables: tunes the allocator and, when the BLAS library picked a
// baseline kernel set on a CPU with AVX2/AVX-512, re-executes the process
// once with OPENBLAS_CORETYPE set. Returns normally if nothing changes.
void configure_runtime(int argc, char** argv);

// Kernel set the BLAS library is using.
std::string blas_core_name();

}  // namespace rafsnn
