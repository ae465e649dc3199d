#pragma once

#include <gtest/gtest.h>

#include "findview/error.hpp"

namespace findview::oracle {

template <typename F>
ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected findview::Error";
  return ErrorCode::Io;
}

}  // namespace findview::oracle
