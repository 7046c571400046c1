#pragma once

#include "kipkit/adam.hpp"
#include "kipkit/backdoor.hpp"
#include "kipkit/backdoor_types.hpp"
#include "kipkit/common.hpp"
#include "kipkit/dataset.hpp"
#include "kipkit/diagnostics.hpp"
#include "kipkit/distill.hpp"
#include "kipkit/harness.hpp"
#include "kipkit/kernels.hpp"
#include "kipkit/krr.hpp"
#include "kipkit/matrix.hpp"
#include "kipkit/rng.hpp"
#include "kipkit/serialize.hpp"
