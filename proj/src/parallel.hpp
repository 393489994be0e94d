#pragma once

#ifdef VISCOFRAC_HAVE_OPENMP
#define VISCOFRAC_PARALLEL_FOR _Pragma("omp parallel for schedule(static)")
#else
#define VISCOFRAC_PARALLEL_FOR
#endif
