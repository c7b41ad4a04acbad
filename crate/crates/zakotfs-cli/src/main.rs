fn main() {
    println!("zakotfs");
}
