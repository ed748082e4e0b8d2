#pragma once

#include <doctest.h>

#include "mantra/errors.hpp"

// Checks that `expr` throws mantra::Error carrying `error_code`.
#define CHECK_ERROR_CODE(expr, error_code)                    \
  do {                                                        \
    bool thrown_ = false;                                     \
    try {                                                     \
      (void)(expr);                                           \
    } catch (const ::mantra::Error& e_) {                     \
      thrown_ = true;                                         \
      CHECK_MESSAGE(e_.code() == (error_code), e_.what());    \
    }                                                         \
    CHECK_MESSAGE(thrown_, "expected mantra::Error from " #expr); \
  } while (false)
