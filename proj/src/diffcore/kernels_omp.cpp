#define SIMRECON_KERNELS_PAR 1
#include "kernels_impl.inl"
