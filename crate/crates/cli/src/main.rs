fn main() {
    println!("laasim");
}
