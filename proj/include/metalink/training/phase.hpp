#pragma once

namespace metalink::training {

// Marks the current thread as running the test phase for its lifetime.
// The feedback link refuses to operate while one is active.
class TestPhaseScope {
 public:
  TestPhaseScope();
  ~TestPhaseScope();
  TestPhaseScope(const TestPhaseScope&) = delete;
  TestPhaseScope& operator=(const TestPhaseScope&) = delete;

 private:
  bool previous_;
};

bool in_test_phase() noexcept;

}  // namespace metalink::training
