#define SIMRECON_KERNELS_PAR 0
#include "kernels_impl.inl"
