#pragma once

#include "volseg/segnet/attention.hpp"
#include "volseg/segnet/config.hpp"
#include "volseg/segnet/layers.hpp"
#include "volseg/segnet/loss.hpp"
#include "volseg/segnet/network.hpp"
#include "volseg/segnet/tensor.hpp"
#include "volseg/segnet/train.hpp"
#include "volseg/segnet/weights.hpp"
