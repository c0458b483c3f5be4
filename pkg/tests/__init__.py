# Tests for lgmm
