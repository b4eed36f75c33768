// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Prints the exact-versus-approximate COUNT scaling curve as a markdown
//! table.

use std::time::Instant;

use pgfdb_bench::{aggregate_plan, random_table, run};

fn main() {
    let workers = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1);
    println!("| n | exact COUNT | moments COUNT | normal COUNT | speed-up (exact / moments) |");
    println!("|---|---|---|---|---|");
    for exp in 4..=6 {
        let n = 10usize.pow(exp);
        let data = random_table(n, 1, exp as u64);
        let mut times = Vec::new();
        for method in ["exact", "moments", "normal"] {
            let plan = aggregate_plan("count", method);
            let start = Instant::now();
            run(&plan, &data, workers);
            times.push(start.elapsed().as_secs_f64() * 1e3);
        }
        println!(
            "| 10^{exp} | {:.1} ms | {:.2} ms | {:.2} ms | {:.0}x |",
            times[0],
            times[1],
            times[2],
            times[0] / times[1]
        );
    }
}
