#pragma once

#include "comix/adapters/coco.hpp"
#include "comix/adapters/common.hpp"
#include "comix/adapters/dcm.hpp"
#include "comix/adapters/detect.hpp"
#include "comix/adapters/ebd.hpp"
#include "comix/adapters/manga109.hpp"
#include "comix/adapters/yolo.hpp"
#include "comix/coco.hpp"
#include "comix/converters.hpp"
#include "comix/error.hpp"
#include "comix/eval_io.hpp"
#include "comix/evaluator.hpp"
#include "comix/manifest.hpp"
#include "comix/parallel.hpp"
#include "comix/split.hpp"
#include "comix/stats.hpp"
#include "comix/uca.hpp"
#include "comix/uca_xml.hpp"
