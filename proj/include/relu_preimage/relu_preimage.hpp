#pragma once

#include "relu_preimage/errors.hpp"
#include "relu_preimage/linalg.hpp"
#include "relu_preimage/lp.hpp"
#include "relu_preimage/model_io.hpp"
#include "relu_preimage/omni.hpp"
#include "relu_preimage/preimage.hpp"
#include "relu_preimage/stability.hpp"
