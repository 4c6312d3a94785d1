// SPDX-License-Identifier: Apache-2.0

//! Non-dominated sorting and crowding distance on a handful of
//! (response time, imbalance) pairs.

use fogbus::scheduler::{crowding_distance, non_dominated_sort};

fn main() {
    let points = vec![
        vec![10.0, 4.0],
        vec![12.0, 2.0],
        vec![15.0, 1.0],
        vec![11.0, 5.0],
        vec![14.0, 3.0],
        vec![20.0, 6.0],
        vec![9.0, 9.0],
    ];
    for (rank, front) in non_dominated_sort(&points).unwrap().iter().enumerate() {
        let members: Vec<Vec<f64>> = front.iter().map(|&i| points[i].clone()).collect();
        let crowding = crowding_distance(&members);
        println!("front {rank}:");
        for (i, d) in front.iter().zip(crowding) {
            println!("  #{i} {:?}  crowding {d}", points[*i]);
        }
    }
}
