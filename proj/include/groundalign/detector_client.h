/* Copyright 2026 The groundalign Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef GROUNDALIGN_DETECTOR_CLIENT_H_
#define GROUNDALIGN_DETECTOR_CLIENT_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "groundalign/protocol.h"
#include "groundalign/transport.h"

namespace groundalign {

// One text-conditioned detection query. image_id stays local; only the image
// reference travels on the wire.
struct DetectionQuery {
  int64_t image_id = 0;
  std::string image_ref;
  std::string expression;
  int64_t category_id = 0;
};

struct ClientOptions {
  // Queries per detect message.
  size_t batch_size = 32;
  // Detect messages in flight before the client waits for a reply.
  size_t max_in_flight = 4;
};

// Sole owner of a Transport. Thread-safe: calls from several threads are
// serialized, and a finetune never overlaps a detect.
class DetectorClient {
 public:
  explicit DetectorClient(std::unique_ptr<Transport> transport,
                          ClientOptions options = {});

  // Registers (or returns) a root model known to the adapter.
  ModelHandle RootModel(const std::string& id,
                        const std::string& created_from = "pretrained");

  // One group per query, in query order, each sorted by descending score.
  // Responses that carry invalid geometry or out-of-range scores are rejected
  // with ProtocolError("invalid_response").
  std::vector<std::vector<Detection>> Detect(
      const ModelHandle& model, std::span<const DetectionQuery> queries);

  // Throws PreconditionError before sending anything if `dataset` does not
  // exist. The returned handle is registered with parent = model.id.
  ModelHandle Finetune(const ModelHandle& model,
                       const std::filesystem::path& dataset,
                       const FinetuneConfig& config);

  const ModelLineage& lineage() const { return lineage_; }
  int finetune_calls() const { return finetune_calls_; }

 private:
  // Receives until the reply for `id` arrives; replies for other ids are
  // stashed for later.
  Response AwaitReply(int64_t id);

  std::unique_ptr<Transport> transport_;
  ClientOptions options_;
  std::mutex mu_;
  int64_t next_id_ = 1;
  std::map<int64_t, Response> stash_;
  ModelLineage lineage_;
  int finetune_calls_ = 0;
};

// Builds a client from an adapter spec:
//   "subprocess:<shell command>"  newline-delimited JSON over stdio
//   "http://host:port"            HTTP binding
//   "mock:<script.json>"          in-process MockDetector
std::unique_ptr<DetectorClient> ConnectDetector(const std::string& spec,
                                                ClientOptions options = {});

}  // namespace groundalign

#endif  // GROUNDALIGN_DETECTOR_CLIENT_H_
