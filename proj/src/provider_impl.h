// Copyright 2026 The cfx Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CFX_SRC_PROVIDER_IMPL_H_
#define CFX_SRC_PROVIDER_IMPL_H_

#include <memory>

#include "cfx/providers.h"

namespace cfx::internal {

std::unique_ptr<ChatProvider> NewOpenAiChat(
    const ProviderConfig& cfg, std::unique_ptr<HttpTransport> transport,
    Sleeper sleep);
std::unique_ptr<Embedder> NewOpenAiEmbedder(
    const ProviderConfig& cfg, std::unique_ptr<HttpTransport> transport,
    Sleeper sleep);
std::unique_ptr<TokenScorer> NewOpenAiScorer(
    const ProviderConfig& cfg, std::unique_ptr<HttpTransport> transport,
    Sleeper sleep);
std::unique_ptr<Classifier> NewHttpClassifier(
    const ProviderConfig& cfg, const Task& task,
    std::unique_ptr<HttpTransport> transport, Sleeper sleep);

std::unique_ptr<ChatProvider> NewRewriteChat(const ProviderConfig& cfg);
std::unique_ptr<ChatProvider> NewJudgeChat(const ProviderConfig& cfg);
std::unique_ptr<TokenScorer> NewUniformScorer(const ProviderConfig& cfg);
std::unique_ptr<TokenScorer> NewConstantScorer(const ProviderConfig& cfg);
std::unique_ptr<TokenScorer> NewHashScorer(const ProviderConfig& cfg);
std::unique_ptr<Classifier> NewOverlapClassifier(const ProviderConfig& cfg,
                                                 const Task& task);

}  // namespace cfx::internal

#endif  // CFX_SRC_PROVIDER_IMPL_H_
